"""Deterministic run artifacts: RFC-4180 CSV, JSON reports, pure SVG plots.

Every writer is bitwise deterministic for identical inputs: floats are
rendered with 17 significant digits (round-trip exact for doubles), JSON
keys are sorted, and no timestamps or environment data enter the output.
"""

import csv
import hashlib
import json

REPORT_SCHEMA = "sasaki-report-v1"


def fmt(x):
    """Render a value for CSV: floats at 17 significant digits."""
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows):
    """RFC-4180 CSV with a header row; returns the path."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """(header, rows) with every field parsed as float when possible."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for rec in r:
            out = []
            for v in rec:
                try:
                    out.append(float(v))
                except ValueError:
                    out.append(v)
            rows.append(out)
    return header, rows


def file_checksum(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


def write_report(path, report):
    """JSON run report under the versioned schema; returns the path."""
    body = dict(report)
    body["schema"] = REPORT_SCHEMA
    with open(path, "w") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_report(path):
    with open(path) as fh:
        body = json.load(fh)
    if body.get("schema") != REPORT_SCHEMA:
        from .errors import SchemaMismatch
        raise SchemaMismatch("unknown report schema %r" % body.get("schema"))
    return body


# ---------------------------------------------------------------------------
# SVG line plots (one series per file, no plotting dependencies)
# ---------------------------------------------------------------------------

_W, _H, _PAD = 640, 400, 50


def _scale(vals, lo_px, hi_px):
    vmin = min(vals)
    vmax = max(vals)
    span = vmax - vmin
    if span <= 0.0:
        span = 1.0
        vmin -= 0.5
    k = (hi_px - lo_px) / span
    return [lo_px + (v - vmin) * k for v in vals], vmin, vmax


def write_svg_series(path, xs, ys, title, xlabel="t"):
    """Single polyline plot with axis frame and range labels."""
    xs = [float(v) for v in xs]
    ys = [float(v) for v in ys]
    px, x0, x1 = _scale(xs, _PAD, _W - _PAD)
    py, y0, y1 = _scale(ys, _H - _PAD, _PAD)
    pts = " ".join("%.2f,%.2f" % (a, b) for a, b in zip(px, py))
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d">'
        % (_W, _H),
        '<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
        'stroke="black"/>' % (_PAD, _PAD, _W - 2 * _PAD, _H - 2 * _PAD),
        '<text x="%d" y="24" font-size="14">%s</text>' % (_PAD, title),
        '<text x="%d" y="%d" font-size="11">%s</text>'
        % (_W // 2, _H - 12, xlabel),
        '<text x="%d" y="%d" font-size="11">%s</text>'
        % (_PAD, _H - _PAD + 16, fmt(x0)),
        '<text x="%d" y="%d" font-size="11" text-anchor="end">%s</text>'
        % (_W - _PAD, _H - _PAD + 16, fmt(x1)),
        '<text x="4" y="%d" font-size="11">%s</text>' % (_H - _PAD, fmt(y0)),
        '<text x="4" y="%d" font-size="11">%s</text>' % (_PAD, fmt(y1)),
        '<polyline fill="none" stroke="steelblue" stroke-width="1.5" '
        'points="%s"/>' % pts,
        "</svg>",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
