"""
Sync, pipelined and async scheduling
====================================

Run the same mock workload three ways.  The stage costs are a scaled-down
copy of the measured Resnet50 profile so the script finishes in a couple of
seconds.
"""

from leap.scheduler import RESNET50_TIMES, StageTimes, mock_rig, predict_times, run
from leap.vep import chain

# one tenth of the measured per-stage milliseconds
times = StageTimes(*(v / 10 for v in RESNET50_TIMES.as_dict().values()))
print("predicted:", predict_times(times))

for mode in ("sync", "pipelined", "async"):
    src, backend, sink = mock_rig(times, 64, 64, fps=200)
    r = run(mode, src, chain([]), backend, sink, 40)
    line = f"{mode:9s} fps {r.fps:6.1f}  period {r.mean_period_ms:5.2f} ms"
    if mode == "pipelined":
        line += f"  max in flight {r.max_in_flight}"
    if mode == "async":
        line += f"  sampled {len(r.samples)}  dropped {r.dropped_frames}"
    print(line)

# the write stage (5 ms here) bounds the pipelined period from below
