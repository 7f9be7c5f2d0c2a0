"""Checkpoint files: a text manifest followed by a little-endian float32 blob.

    mdsampling-checkpoint
    version=1
    kind=policy
    W=64
    byte_order=little
    dtype=float32
    count=<total parameters>
    layer=conv0.w:4,3,5
    ...
    end

The blob stores the parameters flattened in manifest order.
"""
from pathlib import Path

import numpy as np

from .network import ConvNet

MAGIC = "mdsampling-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(net, path):
    lines = [MAGIC, f"version={VERSION}", f"kind={net.kind}", f"W={net.W}",
             "byte_order=little", "dtype=float32", f"count={net.num_params}"]
    for name, shape in net.layer_shapes():
        lines.append(f"layer={name}:{','.join(str(d) for d in shape)}")
    lines.append("end")
    blob = np.concatenate([p.ravel() for p in net.params.values()]).astype("<f4").tobytes()
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii") + blob)


def _read_manifest(raw, path):
    fields, layers = {}, []
    pos = 0
    first = True
    while True:
        nl = raw.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError(f"{path}: truncated manifest")
        line = raw[pos:nl].decode("ascii", errors="replace")
        pos = nl + 1
        if first:
            if line != MAGIC:
                raise CheckpointError(f"{path}: not a checkpoint file")
            first = False
            continue
        if line == "end":
            return fields, layers, pos
        key, _, val = line.partition("=")
        if key == "layer":
            name, _, dims = val.partition(":")
            layers.append((name, tuple(int(d) for d in dims.split(","))))
        else:
            fields[key] = val


def load_checkpoint(path, expected=None):
    """Load a network; ``expected`` (a ConvNet or a kind string) guards against mismatches."""
    raw = Path(path).read_bytes()
    fields, layers, offset = _read_manifest(raw, path)
    if int(fields.get("version", -1)) != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {fields.get('version')}")
    if fields.get("byte_order") != "little" or fields.get("dtype") != "float32":
        raise CheckpointError(f"{path}: unsupported encoding {fields.get('byte_order')}/{fields.get('dtype')}")
    kind, W, count = fields.get("kind"), int(fields["W"]), int(fields["count"])
    blob = raw[offset:]
    if len(blob) != 4 * count:
        raise CheckpointError(f"{path}: blob holds {len(blob)} bytes, manifest expects {4 * count}")

    if isinstance(expected, str) and expected != kind:
        raise CheckpointError(f"{path}: checkpoint is a {kind} network, expected {expected}")
    net = ConvNet(W, kind)
    target = expected if isinstance(expected, ConvNet) else net
    if target.layer_shapes() != [(n, s) for n, s in layers] or target.kind != kind:
        raise CheckpointError(f"{path}: layer manifest does not match the target {target.kind} network")
    if sum(int(np.prod(s)) for _, s in layers) != count:
        raise CheckpointError(f"{path}: parameter count does not match layer shapes")

    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    pos = 0
    for name, shape in layers:
        size = int(np.prod(shape))
        net.params[name] = flat[pos:pos + size].reshape(shape).copy()
        pos += size
    return net
