"""Per-class dataset statistics."""

from __future__ import annotations

import io

from .manifest import DatasetManifest

__all__ = ["class_length_histogram", "render_histogram"]


def class_length_histogram(manifest: DatasetManifest, bin_edges) -> dict[str, list[int]]:
    """Count videos per (class, duration bin).

    ``bin_edges`` is an ascending list of seconds; n edges define n-1 bins,
    each half-open [lo, hi) except the last, which is closed. Durations
    falling outside the edge range are clamped into the nearest edge bin so
    every row sums to its class count.
    """
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2:
        raise ValueError("need at least 2 bin edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing, got {edges}")

    n_bins = len(edges) - 1
    table = {c: [0] * n_bins for c in manifest.classes}
    for rec in manifest.records:
        b = n_bins - 1
        for i in range(n_bins):
            if rec.duration < edges[i + 1]:
                b = i
                break
        table[rec.class_label][b] += 1
    return table


def render_histogram(table: dict[str, list[int]], bin_edges) -> str:
    """Histogram table as delimited text: one row per class, one column per
    duration bin, plus a row-total column."""
    edges = [float(e) for e in bin_edges]
    labels = [f"[{edges[i]:g},{edges[i + 1]:g})" for i in range(len(edges) - 2)]
    labels.append(f"[{edges[-2]:g},{edges[-1]:g}]")
    buf = io.StringIO()
    buf.write("class\t" + "\t".join(labels) + "\ttotal\n")
    for name, counts in table.items():
        buf.write(name + "\t" + "\t".join(str(c) for c in counts)
                  + f"\t{sum(counts)}\n")
    return buf.getvalue()
