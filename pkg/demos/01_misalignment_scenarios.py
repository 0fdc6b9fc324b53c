"""
Timestamp misalignment across the three capture scenarios
==========================================================

A rate-capped accelerometer cannot see what happens between its own
samples, but a second sensor sampled at the gap midpoints can.  This
script simulates the three canonical timing relationships and scores
each one with the deviation-from-center metric: 100% means the two
streams tick together (the companion adds no new instants), 0% means
every companion sample lands exactly halfway between two accelerometer
samples.
"""

from stag.sensorsim import (ChannelModel, deviation_from_center,
                            simulate_scenario, synth_source)

RATE_HZ = 200.0

src = synth_source(seed=7, duration=2.0, n_components=3)
channel = ChannelModel(accel_snr_db=30.0, gyro_snr_db=20.0)

# scenario 1: two accelerometers sharing one clock (identical twins)
# scenario 2: accelerometer + gyroscope on the same tick grid
# scenario 3: gyroscope offset by half a period, the useful arrangement
print(f"{'scenario':>8}  {'companion':<12} {'deviation %':>12}")
for scenario, label in ((1, "accel twin"), (2, "gyro"), (3, "gyro")):
    accel, companion = simulate_scenario(scenario, src, channel, RATE_HZ)
    deviation = deviation_from_center(accel, companion)
    print(f"{scenario:>8}  {label:<12} {deviation:>12.4f}")

# clock jitter pulls scenario 3 away from perfect centering, a little
print()
print("scenario 3 with timestamp jitter:")
for jitter_std in (0.0, 1e-5, 5e-5, 2e-4):
    accel, gyro = simulate_scenario(3, src, channel, RATE_HZ,
                                    jitter_std=jitter_std)
    deviation = deviation_from_center(accel, gyro)
    print(f"  jitter_std={jitter_std * 1e3:.2f} ms -> {deviation:7.4f}%")
