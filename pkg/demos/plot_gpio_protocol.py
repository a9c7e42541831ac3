"""
Control word and reset handshake
================================

The histogram stage is configured through one 32-bit word: rows in bits
11:0, columns in bits 23:12 and a reset flag in bit 24.
"""

from leap.errors import ProtocolError
from leap.histeq import HistEqConfig, HistEqState, pack_gpio, unpack_gpio

w = pack_gpio(1080, 1920, reset=False)
print(w, "->", unpack_gpio(w))

state = HistEqState(HistEqConfig(1080, 1920))

# changing size while running is refused
try:
    state.configure(pack_gpio(720, 1280, False))
except ProtocolError as exc:
    print("rejected:", exc)

# assert reset with the new size, then release it
state.configure(pack_gpio(720, 1280, True))
print("in reset:", state.in_reset)
state.configure(pack_gpio(720, 1280, False))
print("running at", state.cols, "x", state.rows)
