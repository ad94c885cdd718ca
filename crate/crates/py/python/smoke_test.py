"""Smoke test for the evframe extension module.

Build and run from the workspace root:

    cargo build -p evframe-py --release
    cp target/release/libevframe_py.so crates/py/python/evframe.so
    python3 crates/py/python/smoke_test.py
"""

import os
import struct
import sys
import tempfile

import evframe


def floats(buf):
    return struct.unpack("<%df" % (len(buf) // 4), buf)


def at(values, shape, c, x, y):
    _, h, w = shape
    return values[c * h * w + y * w + x]


def main():
    events = [(10, 1, 1, 1), (30, 1, 1, 1), (40, 2, 2, -1)]
    buf, shape = evframe.render_events(events, (4, 4), "lnecs")
    assert shape == (4, 4, 4), shape
    v = floats(buf)
    assert abs(at(v, shape, 0, 1, 1) - 2 / 3) < 1e-7
    assert at(v, shape, 1, 2, 2) == 1.0
    assert at(v, shape, 2, 1, 1) == 1.0
    assert at(v, shape, 3, 2, 2) == 0.5

    buf, shape = evframe.render_events([], (8, 6), "ec")
    assert shape == (2, 6, 8) and not any(floats(buf))

    scene = """
width = 240
height = 150
contrast_threshold = 0.2
duration_us = 200000
seed = 1

[[shapes]]
kind = "disc"
radius = 8.0
path = { type = "linear", from = [20.0, 75.0], to = [220.0, 75.0] }
"""
    stream, traj_csv = evframe.simulate(scene)
    assert len(stream) > 1000 and stream.geometry == (240, 150)
    assert traj_csv.startswith("t,j0u,j0v")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "s.evb")
        with open(path, "wb") as f:
            f.write(stream.encode("evb"))
        again = evframe.load_stream(path)
        assert again.events() == stream.events()

    segments = evframe.segment(stream, "count:1000")
    assert all(s[1] == 1000 for s in segments)
    frames = evframe.render_segments(stream, "count:1000", "lnecs", size=(120, 75))
    assert len(frames) == len(segments)
    first, shape = frames[0]
    direct, _ = evframe.render(stream, "lnecs", size=(120, 75), offset=0, count=1000)
    assert first == direct and shape == (4, 75, 120)

    pose = [float(i) for i in range(42)]
    assert evframe.aucp([pose], [pose]) == 1.0

    try:
        evframe.render_events([(0, 9, 0, 1)], (4, 4), "ec")
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-bounds event accepted")

    print("evframe smoke test passed")


if __name__ == "__main__":
    sys.exit(main())
