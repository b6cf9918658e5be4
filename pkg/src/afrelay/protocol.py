"""Slot schedule of two alternating half-duplex relays.

A frame of T source symbols takes T+1 slots: in slot k the source sends
x_k to one relay while the other relay forwards x_{k-1} to the destination,
and the roles swap every slot.  Only the first slot (nobody forwards) and the
last slot (nobody listens) are free of inter-relay interference.
"""
import csv
import io
from dataclasses import astuple, dataclass, fields
from fractions import Fraction

from .errors import DomainError

R1, R2 = "R1", "R2"


@dataclass(frozen=True)
class SlotEvent:
    slot_index: int
    source_symbol: int = None
    listening_relay: str = None
    forwarding_relay: str = None
    forwarded_symbol: int = None
    iri_active: bool = False


def _listener(slot):
    return R1 if slot % 2 == 1 else R2


def schedule(t):
    """Events of the T+1 slots that deliver a frame of ``t`` symbols."""
    if int(t) < 1:
        raise DomainError("frame must hold at least one symbol")
    t = int(t)
    events = []
    for k in range(1, t + 2):
        sending = k <= t
        forwarding = k >= 2
        listener = _listener(k) if sending else None
        # the forwarder is whoever listened in the previous slot
        forwarder = _listener(k - 1) if forwarding else None
        events.append(SlotEvent(
            slot_index=k,
            source_symbol=k if sending else None,
            listening_relay=listener,
            forwarding_relay=forwarder,
            forwarded_symbol=k - 1 if forwarding else None,
            iri_active=listener is not None and forwarder is not None,
        ))
    return events


def multiplexing_ratio(t=None):
    """New source symbols per slot, T/(T+1); ``t=None`` is the T -> inf limit."""
    if t is None:
        return Fraction(1)
    if int(t) < 1:
        raise DomainError("frame must hold at least one symbol")
    return Fraction(int(t), int(t) + 1)


def schedule_ratio(events):
    """Fraction of slots that carry a new source symbol."""
    sending = sum(e.source_symbol is not None for e in events)
    return Fraction(sending, len(events))


def schedule_table(events, fmt="csv"):
    """Render events as CSV or as an aligned plain-text table."""
    header = [f.name for f in fields(SlotEvent)]
    rows = [["" if v is None else str(v) for v in astuple(e)] for e in events]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "text":
        widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
        lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
        lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        return "\n".join(lines) + "\n"
    raise DomainError(f"unknown table format {fmt!r}")
