"""
Picking the informative axes out of six noisy channels
======================================================

A tri-axis accelerometer plus a tri-axis gyroscope give six candidate
channels, but a desk-mounted vibration source excites mostly one
accelerometer axis, and only the coupled gyroscope axes carry a usable
echo of it.  ``select_axes`` ranks the accelerometer axes by a
periodogram-based SNR estimate and the gyroscope axes by lagged
correlation against the winning accelerometer axis.
"""

from stag.fusion import select_axes
from stag.sensorsim import ChannelModel, sample_stream, synth_source

src = synth_source(seed=3, duration=4.0, n_components=3)

# cross_axis_leak bleeds a scaled copy of the main axis into the other
# two, so every channel carries *something*; the ranking still has to
# find the dominant ones.
channel = ChannelModel(accel_snr_db=22.0, gyro_snr_db=14.0,
                       cross_axis_leak=0.25, gyro_y_gain=0.6)

accel = sample_stream(src, channel, "accel", 400.0)
gyro = sample_stream(src, channel, "gyro", 400.0)

accel_axis, gyro_axes, report = select_axes(accel, gyro)

names = "xyz"
print("accelerometer SNR estimates (dB):")
for axis, snr in enumerate(report.accel_snr_db):
    marker = "  <- selected" if axis == accel_axis else ""
    print(f"  {names[axis]}: {snr:7.2f}{marker}")

print()
print("gyroscope |corr| against the selected accel axis (best lag):")
for axis, (score, lag) in enumerate(zip(report.gyro_score,
                                        report.gyro_best_lag)):
    marker = "  <- selected" if axis in gyro_axes else ""
    print(f"  {names[axis]}: {score:6.3f} at lag {lag:+d}{marker}")

print()
print(f"fusion will read accel {names[accel_axis]!r} and gyro "
      f"{names[gyro_axes[0]]!r}, {names[gyro_axes[1]]!r}")
