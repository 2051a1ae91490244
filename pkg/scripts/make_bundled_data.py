"""Regenerate the model descriptors and synthetic timing tables under src/paroracle/data.

Timings are synthetic: forward time is the layer's multiply-adds at an assumed
sustained rate, backward is twice that, weight update is proportional to the
parameter count. They exist so the CLI has something to run on; replace them
with profiled numbers for real projections.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "paroracle" / "data"
sys.path.insert(0, str(DATA.parents[1]))

from paroracle.model_ir import adapt_layer, infer_output_shape, parse_model  # noqa: E402

MACS_PER_S = 5e12
PARAMS_PER_S = 2.5e10


def resnet50() -> str:
    lines = ["model resnet50", "dataset D=1281167 B=32 E=90", "# 3x226x226 input; stride on the first 1x1 conv of each stage"]
    lines.append("conv1 Conv C=3 F=64 X=226,226 K=7 stride=2 pad=3 bias=0")
    size, cin, prev = 113, 64, "conv1"
    for stage, (mid, blocks) in enumerate(((64, 3), (128, 4), (256, 6), (512, 3)), start=2):
        cout = 4 * mid
        for b in range(blocks):
            tag = f"res{stage}{'abcdef'[b]}"
            stride = 2 if b == 0 else 1
            out = (size - 1) // stride + 1
            lines.append(f"{tag}_1 Conv C={cin} F={mid} X={size},{size} K=1 stride={stride} pad=0 bias=0")
            lines.append(f"{tag}_2 Conv C={mid} F={mid} X={out},{out} K=3 stride=1 pad=1 bias=0")
            if b == 0:
                # projection shortcut folded in as extra input channels of the last conv
                lines.append(
                    f"{tag}_3 Conv C={mid + cin} F={cout} X={out},{out} K=1 stride=1 pad=0 bias=0 src={tag}_2,{prev}"
                )
            else:
                lines.append(f"{tag}_3 Conv C={mid} F={cout} X={out},{out} K=1 stride=1 pad=0 bias=0")
            size, cin, prev = out, cout, f"{tag}_3"
    lines.append(f"# classifier as a 1x1 conv ahead of global average pooling")
    lines.append(f"fc Conv C=2048 F=1000 X={size},{size} K=1 bias=1")
    return "\n".join(lines) + "\n"


def vgg16() -> str:
    lines = ["model vgg16", "dataset D=1281167 B=32 E=74", "# 3x226x226 input; pools 2-5 pad by one to round up"]
    size, cin = 226, 3
    n = 0
    for block, (width, convs) in enumerate(((64, 2), (128, 2), (256, 3), (512, 3), (512, 3)), start=1):
        for i in range(1, convs + 1):
            lines.append(f"conv{block}_{i} Conv C={cin} F={width} X={size},{size} K=3 stride=1 pad=1 bias=1")
            lines.append(f"relu{block}_{i} ElementWise C={width} X={size},{size}")
            cin = width
        pad = 0 if block == 1 else 1
        lines.append(f"pool{block} Pool C={width} X={size},{size} K=2 stride=2 pad={pad}")
        size = (size + 2 * pad - 2) // 2 + 1
    lines.append(f"fc6 FullyConnected C=512 F=4096 X={size},{size} bias=1")
    lines.append("relu6 ElementWise C=4096 X=1,1")
    lines.append("drop6 ElementWise C=4096 X=1,1")
    lines.append("fc7 FullyConnected C=4096 F=4096 X=1,1 bias=1")
    lines.append("relu7 ElementWise C=4096 X=1,1")
    lines.append("drop7 ElementWise C=4096 X=1,1")
    lines.append("fc8 FullyConnected C=4096 F=1000 X=1,1 bias=1")
    return "\n".join(lines) + "\n"


def cosmoflow() -> str:
    lines = [
        "model cosmoflow",
        "dataset D=1584 B=16 E=130",
        "# 4 redshift channels over a 256^3 volume",
    ]
    size, cin = 256, 4
    for i, width in enumerate((32, 64, 128, 256, 128), start=1):
        lines.append(f"conv{i} Conv C={cin} F={width} X={size},{size},{size} K=3 stride=1 pad=1 bias=1")
        lines.append(f"relu{i} ElementWise C={width} X={size},{size},{size}")
        lines.append(f"pool{i} Pool C={width} X={size},{size},{size} K=2 stride=2 pad=0")
        size //= 2
        cin = width
    lines.append(f"pool6 Pool C={cin} X={size},{size},{size} K=2 stride=2 pad=0")
    size //= 2
    lines.append(f"fc1 FullyConnected C={cin} F=16 X={size},{size},{size} bias=1")
    lines.append("relu_fc1 ElementWise C=16 X=1,1,1")
    lines.append("fc2 FullyConnected C=16 F=16 X=1,1,1 bias=1")
    lines.append("fc3 FullyConnected C=16 F=4 X=1,1,1 bias=1")
    return "\n".join(lines) + "\n"


def timings(model_text: str) -> str:
    model = parse_model(model_text)
    rows = ["layer,fw_s_per_sample,bw_s_per_sample,wu_s_per_iter"]
    for layer, counts in zip(model.layers, model.counts):
        adapted = adapt_layer(layer)
        out = infer_output_shape(adapted)
        if counts.w_elems:
            macs = counts.w_elems * math.prod(out)
        else:
            # element-wise, pooling and normalisation touch every input once or so
            macs = counts.x_elems * (math.prod(adapted.kernel) if adapted.kernel else 1)
        fw = macs / MACS_PER_S
        wu = (counts.w_elems + counts.bias_elems) / PARAMS_PER_S
        rows.append(f"{layer.name},{fw:.6e},{2 * fw:.6e},{wu:.6e}")
    return "\n".join(rows) + "\n"


SYSTEM = """\
# fat-tree cluster: 4 accelerators per node, 32 nodes per rack
tier node pes=4 alpha=5e-06 beta=5e-11
tier rack pes=128 alpha=1e-05 beta=8e-11
tier fabric pes=4096 alpha=1.5e-05 beta=1e-10
memory=16e9 delta=4 gamma=1.0 ring_tree_threshold=524288 tree_chunks=1 contention_phi=1
"""


def benchmarks() -> str:
    rows = ["pattern,p,bytes,seconds"]
    tiers = ((4, 5e-6, 5e-11), (128, 1e-5, 8e-11), (4096, 1.5e-5, 1e-10))
    for p in (2, 4, 8, 16, 32, 64, 128, 256, 512, 1024):
        alpha, beta = next((a, b) for pes, a, b in tiers if pes >= p)
        for m in (1 << 16, 1 << 20, 1 << 24, 1 << 27):
            rows.append(f"allreduce,{p},{m},{2 * (p - 1) * (alpha + m / p * beta):.9e}")
    return "\n".join(rows) + "\n"


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    for name, text in (("resnet50", resnet50()), ("vgg16", vgg16()), ("cosmoflow", cosmoflow())):
        (DATA / f"{name}.model").write_text(text)
        (DATA / f"{name}.timings.csv").write_text(timings(text))
    (DATA / "fat_tree_16gb.system").write_text(SYSTEM)
    (DATA / "allreduce_benchmarks.csv").write_text(benchmarks())


if __name__ == "__main__":
    main()
