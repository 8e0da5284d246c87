"""Command-line front end: ``cvng <command> --config <json> [--out <path>]``.

Exit codes: 0 on success, 2 when the configuration or the requested object
is invalid, 3 when a numerical routine fails to converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import conditional as cd
from . import correlations as cr
from . import sampler as sm
from . import symplectic as sy
from . import wigner as wg
from . import witnesses as wt
from .errors import NumericalError, ValidationError

COMMANDS = ("wigner", "fig4", "fig5", "sample", "report")
MAX_GRID_ROWS = 2_000_000
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def load_schema(command: str) -> dict:
    text = resources.files("cvng").joinpath("schemas", f"{command}.json").read_text()
    return json.loads(text)


def validate_config(config: dict, command: str) -> None:
    if not isinstance(config, dict):
        raise ValidationError("configuration must be a JSON object")
    if config.get("command", command) != command:
        raise ValidationError(f"configuration is for {config.get('command')!r}, not {command!r}")
    cfg = dict(config)
    cfg.setdefault("command", command)
    try:
        jsonschema.validate(cfg, load_schema(command))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ValidationError(f"config {where}: {exc.message}") from exc


# ---------------------------------------------------------------------------
# state shorthands


def _params(text: str) -> dict:
    out = {}
    for item in filter(None, text.split(",")):
        if "=" not in item:
            raise ValidationError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError as exc:
            raise ValidationError(f"parameter {k!r} is not a number") from exc
    return out


def _squeeze_param(p: dict, name: str) -> float:
    if "s" in p and "db" in p:
        raise ValidationError(f"{name}: give either s or db")
    s = p.get("s", cr.db_to_ratio(p["db"]) if "db" in p else None)
    if s is None or not s > 0:
        raise ValidationError(f"{name}: needs a positive squeezing s (or db)")
    return float(s)


def _check_keys(p: dict, allowed, name: str) -> None:
    extra = set(p) - set(allowed)
    if extra:
        raise ValidationError(f"{name}: unknown parameters {sorted(extra)}")


def parse_gaussian(spec: str) -> sy.GaussianState | None:
    """Gaussian state for a ``gaussian:<kind>[:k=v,...]`` shorthand, else ``None``."""
    parts = spec.split(":")
    if parts[0] != "gaussian":
        return None
    if len(parts) < 2 or len(parts) > 3:
        raise ValidationError(f"malformed state {spec!r}")
    kind = parts[1].lower()
    p = _params(parts[2]) if len(parts) == 3 else {}
    if kind == "vacuum":
        _check_keys(p, {"m"}, spec)
        return sy.GaussianState.vacuum(int(p.get("m", 1)))
    if kind == "coherent":
        _check_keys(p, {"x", "p"}, spec)
        return sy.GaussianState.coherent([p.get("x", 0.0), p.get("p", 0.0)])
    if kind == "squeezed":
        _check_keys(p, {"s", "db"}, spec)
        return sy.GaussianState.squeezed(_squeeze_param(p, spec))
    if kind == "thermal":
        _check_keys(p, {"nu"}, spec)
        if p.get("nu", 0.0) < 1.0:
            raise ValidationError(f"{spec}: thermal needs nu >= 1")
        return sy.GaussianState.thermal(p["nu"])
    if kind == "epr":
        _check_keys(p, {"s", "db"}, spec)
        return sy.GaussianState.epr(_squeeze_param(p, spec))
    if kind == "split":
        _check_keys(p, {"s", "db"}, spec)
        return cr.split_squeezed_state(_squeeze_param(p, spec))
    raise ValidationError(f"unknown Gaussian state {kind!r}")


def parse_state(spec: str) -> wg.WignerForm:
    """Wigner form for a state shorthand such as ``fock:1``, ``cat:+:6`` or ``gaussian:EPR:s=4``."""
    if not isinstance(spec, str) or not spec:
        raise ValidationError("state must be a non-empty string")
    g = parse_gaussian(spec)
    if g is not None:
        return wg.gaussian_wigner(g)
    parts = spec.split(":")
    head = parts[0].lower()
    try:
        if head == "fock" and len(parts) == 2:
            ns = [int(v) for v in parts[1].split(",")]
            if any(n < 0 for n in ns):
                raise ValidationError("photon numbers must be non-negative")
            return wg.fock_wigner(ns[0]) if len(ns) == 1 else wg.multimode_fock_wigner(ns)
        if head == "cat" and len(parts) == 3:
            parity = {"+": 1, "-": -1}.get(parts[1])
            if parity is None:
                raise ValidationError("cat parity must be '+' or '-'")
            return wg.cat_wigner(parity, [float(parts[2]), 0.0])
        if head == "fockmix" and len(parts) == 2:
            p = _params(parts[1])
            _check_keys(p, {"gamma", "n"}, spec)
            gamma = p.get("gamma", -1.0)
            if not 0.0 <= gamma <= 1.0:
                raise ValidationError("fockmix needs gamma in [0, 1]")
            return wg.fock_vacuum_mixture(1.0 - gamma, int(p.get("n", 1)))
        if head == "gkp" and len(parts) in (2, 3):
            p = _params(parts[2]) if len(parts) == 3 else {}
            _check_keys(p, {"s", "delta"}, spec)
            return wg.gkp_wigner(int(parts[1]), p.get("s", 4.0), p.get("delta", 0.3))
        if head == "subtracted" and len(parts) == 2:
            p = _params(parts[1])
            _check_keys(p, {"s", "db"}, spec)
            return cd.photon_subtract(sy.GaussianState.squeezed(_squeeze_param(p, spec)), [1.0, 0.0]).form
        if head == "added" and len(parts) == 2:
            p = _params(parts[1])
            _check_keys(p, {"x", "p"}, spec)
            return cd.photon_add(sy.GaussianState.coherent([p.get("x", 0.0), p.get("p", 0.0)]), [1.0, 0.0]).form
        if head == "hom" and len(parts) == 1:
            return wg.multimode_fock_wigner([1, 1]).transformed(sy.beamsplitter(np.pi / 4))
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed state {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown state {spec!r}")


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v) + 0.0)
    return str(v)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_wigner(cfg: dict) -> str:
    W = parse_state(cfg["state"])
    g = cfg["grid"]
    if g["max"] < g["min"]:
        raise ValidationError("grid max is below grid min")
    num = int(round((g["max"] - g["min"]) / g["step"])) + 1
    if num ** W.n > MAX_GRID_ROWS:
        raise ValidationError(f"grid would have {num ** W.n} rows (limit {MAX_GRID_ROWS})")
    axis = g["min"] + g["step"] * np.arange(num)
    mesh = np.meshgrid(*([axis] * W.n), indexing="ij")
    X = np.column_stack([a.ravel() for a in mesh])
    vals = W(X)
    if not np.all(np.isfinite(vals)):
        raise NumericalError("non-finite Wigner values on the grid")
    names = [f"{q}{j}" for j in range(W.n // 2) for q in ("x", "p")]
    return _csv(names + ["W"], (list(x) + [v] for x, v in zip(X, vals)))


def _range(r: dict) -> np.ndarray:
    return np.linspace(r["start"], r["stop"], r["num"])


def cmd_fig4(cfg: dict) -> str:
    variants = tuple(cfg.get("variants", cr.FIG4_VARIANTS))
    rows = cr.fig4_rows(_range(cfg["s_db"]), variants)
    return _csv(["s_dB", "delta_E_R", "variant"], rows)


def cmd_fig5(cfg: dict) -> str:
    configs = tuple(cfg.get("configs", cr.FIG5_CONFIGS))
    rows = cr.fig5_rows(_range(cfg["theta"]), configs)
    return _csv(["theta", "E_R", "config"], rows)


def _gaussian_channel(spec: dict, k: int, path: str) -> sy.GaussianChannel:
    t = spec["type"]
    need = {"squeezer": ["s"], "rotation": ["phi"], "beamsplitter": ["theta"], "two_mode_squeezer": ["theta"],
            "loss": ["eta"], "displacement": ["alpha"], "general": ["X", "Vc"]}.get(t, [])
    for key in need:
        if key not in spec:
            raise ValidationError(f"{path}: {t} needs {key!r}")
    if t == "identity":
        return sy.GaussianChannel.identity(k)
    if t in ("squeezer", "rotation"):
        if k != 1:
            raise ValidationError(f"{path}: {t} acts on one mode")
        return sy.GaussianChannel.unitary(sy.squeezer(spec["s"]) if t == "squeezer" else sy.rotation(spec["phi"]))
    if t in ("beamsplitter", "two_mode_squeezer"):
        if k != 2:
            raise ValidationError(f"{path}: {t} acts on two modes")
        S = sy.beamsplitter(spec["theta"]) if t == "beamsplitter" else sy.two_mode_squeezer(spec["theta"])
        return sy.GaussianChannel.unitary(S)
    if t == "loss":
        return sy.GaussianChannel.loss(spec["eta"], k)
    if t == "displacement":
        if len(spec["alpha"]) != 2 * k:
            raise ValidationError(f"{path}: displacement needs {2 * k} entries")
        return sy.GaussianChannel.displacement(spec["alpha"])
    return sy.GaussianChannel(np.array(spec["X"], dtype=float), np.array(spec["Vc"], dtype=float),
                              spec.get("alpha"))


def build_circuit(c: dict) -> sm.Circuit:
    inputs = []
    for i, s in enumerate(c["inputs"]):
        path = f"circuit.inputs[{i}]"
        g = parse_gaussian(s)
        if g is None:
            inputs.append(sm.FormInput(parse_state(s), path))
        else:
            if g.m != 1:
                raise ValidationError(f"{path}: inputs are single-mode")
            inputs.append(sm.GaussianInput(g))
    m = len(inputs)
    channels = []
    for i, ch in enumerate(c.get("channels", [])):
        path = f"circuit.channels[{i}]"
        modes = ch["modes"]
        if max(modes) >= m:
            raise ValidationError(f"{path}: mode index out of range")
        if "channel" in ch:
            chans, weights = [_gaussian_channel(ch["channel"], len(modes), path)], [1.0]
        else:
            chans = [_gaussian_channel(e["channel"], len(modes), f"{path}.mixture[{j}]")
                     for j, e in enumerate(ch["mixture"])]
            weights = [e["weight"] for e in ch["mixture"]]
        channels.append(sm.LocalChannel(tuple(modes), tuple(chans), tuple(weights), path))
    dets = []
    specs = c.get("detectors") or [{"type": "heterodyne"}] * m
    if len(specs) != m:
        raise ValidationError("circuit.detectors: one detector per mode is required")
    for j, d in enumerate(specs):
        path = f"circuit.detectors[{j}]"
        t = d["type"]
        if t == "heterodyne":
            dets.append(sm.Heterodyne())
        elif t == "homodyne":
            if "edges" not in d:
                raise ValidationError(f"{path}: homodyne needs bin edges")
            dets.append(sm.BinnedHomodyne(d["edges"], d.get("phi", 0.0), path))
        elif t == "table":
            if "probs" not in d:
                raise ValidationError(f"{path}: table needs probs")
            dets.append(sm.DiscretePOVM.constant(d["probs"], name=path))
        else:
            dets.append(sm.onoff_detector(path))
    return sm.Circuit(inputs, channels, dets)


def cmd_sample(cfg: dict) -> tuple[str, str]:
    circuit = build_circuit(cfg["circuit"])
    rc = sm.RunConfig(cfg["n_samples"], cfg.get("seed", 0), cfg.get("streams"))
    keep = bool(cfg.get("chain", False))
    records = sm.run(circuit, rc, keep_chain=keep)
    header = ["sample_index"] + circuit.outcome_columns()
    rows = [r.row() for r in records]
    if keep:
        header.append("chain")
        for r, row in zip(records, rows):
            row.append(";".join(" ".join(repr(float(v)) for v in pt) for pt in r.chain))
    summary = {"n_samples": rc.n_samples, "seed": rc.seed, "columns": header[1:]}
    if all(isinstance(d, sm.Heterodyne) for d in circuit.detectors):
        mu, V = sm.heterodyne_targets(circuit)
        summary["target_mean"] = mu.tolist()
        summary["target_cov"] = V.tolist()
        if len(records) >= 2:
            chk = sm.moment_check(sm.outcome_matrix(records), mu, V)
            summary.update(mean=chk.mean.tolist(), cov=chk.cov.tolist(), z_mean=chk.z_mean.tolist(),
                           z_cov=chk.z_cov.tolist(), max_abs_z=chk.max_abs_z)
    else:
        freqs = {}
        for j, d in enumerate(circuit.detectors):
            if d.labels is not None:
                labels = [r.outcomes[j] for r in records]
                freqs[f"m{j}"] = {str(l): labels.count(l) / max(len(labels), 1) for l in d.labels}
        summary["label_frequencies"] = freqs
    return _csv(header, rows), _json(summary)


def cmd_report(cfg: dict) -> str:
    spec = cfg["state"]
    W = parse_state(spec)
    m = W.n // 2
    tol = cfg.get("tolerance", {}).get("negativity", 1e-6)
    nbar = wg.mean_photon_number(W)
    W0 = float(W(np.zeros((1, W.n)))[0])
    vol = wg.negativity_volume(W, tol)
    rep = {
        "state": spec,
        "modes": m,
        "purity": wg.purity(W),
        "mean_photon_number": nbar,
        "wigner_at_origin": W0,
        "negativity_volume": vol,
        "log_negativity": float(np.log1p(vol)),
        "wigner_negative": bool(vol > 10 * tol),
        "qng_witness": wt.qng_energy_witness(W0, max(nbar, 0.0), m),
    }
    g = parse_gaussian(spec)
    if g is not None and m >= 2:
        part = cd.split(m, cfg.get("f_modes", [0]))
        rep["bipartition"] = {"f_modes": list(part.f_modes), "g_modes": list(part.g_modes)}
        rep["ppt_entangled"] = cr.ppt_entangled(g, part)
        rep["steerable"] = {
            "f->g": cr.gaussian_steerable(g, part).steerable,
            "g->f": cr.gaussian_steerable(g, part.swapped()).steerable,
        }
    elif "f_modes" in cfg:
        raise ValidationError("bipartite verdicts are available for multimode Gaussian states only")
    return _json(rep)


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvng", description="Phase-space tools for non-Gaussian states.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", help="output path (overrides the config's 'out'); stdout if absent")
    return ap


def run_command(command: str, config: dict, out: str | None = None) -> None:
    validate_config(config, command)
    out = out or config.get("out")
    if command == "sample":
        records, summary = cmd_sample(config)
        if out:
            _emit(records, out)
            _emit(summary, out + ".summary.json")
        else:
            sys.stdout.write(records)
            sys.stderr.write(summary)
        return
    text = {"wigner": cmd_wigner, "fig4": cmd_fig4, "fig5": cmd_fig5, "report": cmd_report}[command](config)
    _emit(text, out)


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        with open(args.config) as fh:
            config = json.load(fh)
        run_command(args.command, config, args.out)
    except (ValidationError, json.JSONDecodeError, OSError) as exc:
        print(f"cvng: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"cvng: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
