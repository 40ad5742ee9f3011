"""
Rate-distortion and group-size trade-offs
=========================================

Two sweeps characterize an encoding.  The rate-distortion sweep encodes
the same sequence at several quality settings and reports per-frame size
against rendered PSNR; the lossless row isolates pure quantization
error, and H.264 rows appear when an external encoder binary is on PATH.
The group-size ablation shows the keyframe-overhead trade: larger groups
amortize their keyframe over more delta frames, so per-frame size falls
monotonically on smooth content.
"""

from pathlib import Path

from splatstream import group_size_ablation, make_camera, rate_distortion_sweep
from splatstream.codec import h264_available
from splatstream.sweeps import write_ablation_csv, write_rd_csv
from splatstream.synthetic import smooth_motion_sequence

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(parents=True, exist_ok=True)

frames = smooth_motion_sequence(1000, 60, seed=0, amplitude=0.02)
camera = make_camera(eye=(0.0, 0.0, -3.0), target=(0.0, 0.0, 0.0), width=160, height=120)

qps = (15, 25, 35) if h264_available() else ()
if not qps:
    print("no external H.264 encoder on PATH; sweeping the lossless point only\n")

rows = rate_distortion_sweep(frames, qps=qps, cameras=[camera], group_size=20)
print(f"{'qp':>10} {'KiB/frame':>10} {'PSNR dB':>9}")
for row in rows:
    print(f"{str(row.qp):>10} {row.kb_per_frame:>10.3f} {row.psnr_db:>9.3f}")
write_rd_csv(rows, out_dir / "rd.csv")

# Group size vs per-frame cost, same content throughout.  300 frames
# divide evenly by every size, so no group carries remainder overhead.
long_frames = smooth_motion_sequence(1000, 300, seed=0, amplitude=0.02)
ablation = group_size_ablation(long_frames, sizes=(10, 15, 20, 25, 30))
print(f"\n{'group size':>10} {'KiB/frame':>10}")
for row in ablation:
    print(f"{row.group_size:>10} {row.kb_per_frame:>10.3f}")
write_ablation_csv(ablation, out_dir / "ablation.csv")

print(f"\nCSV reports in {out_dir}")
