# One client-side rate limiter driven by hand.
# sRate caps sends per 20 ms window; feedback with a long server queue cuts
# it to 20%, and receipts outpacing sends let it climb back along a cubic.

from replisim.rate_control import RateLimiter, cubic_target

lim = RateLimiter(initial_srate=10.0, audit=True)
now = 0

# fill the window: ten sends admitted, the eleventh refused
sent = 0
while lim.admits(now):
    lim.record_send(now)
    sent += 1
print(f"admitted {sent} keys at t=0, next slot frees at {lim.next_free_time(now) / 1000} ms")

# a server reports 8 queued keys well after the hysteresis period
now = 50_000
lim.on_feedback(8, "tars", now)
print(f"queue 8 > 5 at {now / 1000} ms: sRate {lim.srate:.2f}, R0 {lim.r0:.2f}")

# values keep streaming back, so rRate exceeds sRate and the rate grows
for step in range(1, 16):
    now += 10_000
    for _ in range(30):
        lim.record_receipt(now)
    lim.on_feedback(0, "tars", now)
    print(f"  t={now / 1000:5.0f} ms  sRate {lim.srate:6.2f}")

# the cubic curve itself: 80% of R0 right after a cut, flat at R0 near cbrt(0.2 * 10 / 4e-6) ms
for dt in (0, 40, 79, 120, 200, 300):
    print(f"R({dt:3d} ms) = {cubic_target(dt, 10.0, 0.2, 4e-6):6.2f}")
print(f"{len(lim.audit)} adjustments logged")
