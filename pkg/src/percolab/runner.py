"""Manifest-driven experiment runner.

Manifests are key = value text files (with # comments) carrying a versioned
schema.  Every output embeds the manifest hash; reruns with the same manifest
and seed produce byte-identical result files at any worker count, so wall
time and timestamps live in a separate run_log.json outside the determinism
contract.  Exit codes: 0 success, 1 invariant violation, 2 insufficient
data, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from .counting import count_animals, partitions
from .errors import InsufficientData, InvariantViolation, PercolabError
from .estimators import (
    chi_f_hat,
    kappa_derivative_check,
    kappa_hat,
    origin_cluster_statistics,
    tau_f_decay,
    tau_hat,
    theta_hat,
)
from .expansion import empirical_expansion
from .lattice import LatticeWindow
from .percolation import sample, save_configuration
from .renorm import classification_table, good_probability
from .separating import STATISTICS, tail_experiments
from .verify import (
    moat_mutator,
    run_counting_suite,
    run_expansion_suite,
    run_structure_suite,
)

SCHEMA_VERSION = "1"
USAGE_ERROR = 64

KINDS = ("sample", "classify", "tails", "expansion", "estimate", "counting", "verify")
QUANTITIES = ("theta", "tau", "tau_f", "chi_f", "kappa", "kappa_derivative",
              "histogram", "tau_f_decay", "good_probability")
SUITES = ("structure", "expansion", "counting", "all")


class ManifestError(PercolabError):
    """Invalid manifest: maps to the usage exit code."""


def parse_manifest_text(text: str) -> dict:
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"line {ln}: expected key = value")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ManifestError(f"line {ln}: empty key or value")
        if key in out:
            raise ManifestError(f"line {ln}: duplicate key {key!r}")
        out[key] = value
    return out


def load_manifest(path) -> dict:
    return parse_manifest_text(Path(path).read_text())


def manifest_hash(manifest: dict) -> str:
    canonical = "".join(f"{k}={manifest[k]}\n" for k in sorted(manifest))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _need(manifest: dict, key: str) -> str:
    if key not in manifest:
        raise ManifestError(f"missing required key {key!r}")
    return manifest[key]


def _get_int(manifest, key, default=None):
    if key not in manifest:
        if default is None:
            raise ManifestError(f"missing required key {key!r}")
        return default
    try:
        return int(manifest[key])
    except ValueError as exc:
        raise ManifestError(f"key {key!r} is not an integer") from exc


def _get_float(manifest, key, default=None):
    if key not in manifest:
        if default is None:
            raise ManifestError(f"missing required key {key!r}")
        return default
    try:
        return float(manifest[key])
    except ValueError as exc:
        raise ManifestError(f"key {key!r} is not a number") from exc


def _get_bool(manifest, key, default=False):
    if key not in manifest:
        return default
    v = manifest[key].lower()
    if v in ("1", "true", "yes"):
        return True
    if v in ("0", "false", "no"):
        return False
    raise ManifestError(f"key {key!r} is not a boolean")


def _window(manifest) -> LatticeWindow:
    try:
        return LatticeWindow(
            _get_int(manifest, "d"), _get_int(manifest, "N"), _get_int(manifest, "R")
        )
    except ValueError as exc:
        raise ManifestError(str(exc)) from exc


def _parse_tuple(text: str):
    pts = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        pts.append([int(c) for c in part.replace(",", " ").split()])
    if not pts:
        raise ManifestError("empty vertex tuple")
    return pts


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(c) if isinstance(c, float) else str(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------- #
# kind handlers: return (outputs, exclusions, status_code)


def _run_sample(manifest, out_dir, workers):
    w = _window(manifest)
    p = _get_float(manifest, "p")
    seed = _get_int(manifest, "seed", 0)
    idx = _get_int(manifest, "sample_index", 0)
    config = sample(w, p, seed, idx)
    path = out_dir / "configuration.bin"
    save_configuration(config, path)
    return ["configuration.bin"], {}, 0


def _run_classify(manifest, out_dir, workers):
    w = _window(manifest)
    p = _get_float(manifest, "p")
    seed = _get_int(manifest, "seed", 0)
    idx = _get_int(manifest, "sample_index", 0)
    config = sample(w, p, seed, idx)
    rows = classification_table(config)
    header = [f"b{a}" for a in range(w.d)] + ["status", "code"]
    _write_csv(out_dir / "classification.csv", header, rows)
    return ["classification.csv"], {}, 0


def _run_tails(manifest, out_dir, workers):
    w = _window(manifest)
    p = _get_float(manifest, "p")
    seed = _get_int(manifest, "seed", 0)
    n_samples = _get_int(manifest, "n_samples")
    stats = tuple(s.strip() for s in manifest.get("statistic", ",".join(STATISTICS)).split(","))
    for s in stats:
        if s not in STATISTICS:
            raise ManifestError(f"unknown statistic {s!r}")
    res = tail_experiments(p, w.N, w, n_samples, seed, statistics=stats, workers=workers)
    outputs = []
    summary = {}
    excl = {}
    for s, est in res.items():
        name = f"tails_{s}.csv"
        _write_csv(out_dir / name, ["n", "count", "survival"], est.csv_rows())
        outputs.append(name)
        summary[s] = est.summary()
        excl[s] = est.n_excluded_margin
    _write_json(out_dir / "tails_summary.json", summary)
    outputs.append("tails_summary.json")
    return outputs, excl, 0


def _run_expansion(manifest, out_dir, workers):
    w = _window(manifest)
    p = _get_float(manifest, "p")
    seed = _get_int(manifest, "seed", 0)
    n_samples = _get_int(manifest, "n_samples")
    n_max = _get_int(manifest, "n_max", 30)
    mut = moat_mutator() if _get_bool(manifest, "conditioned") else None
    agg = empirical_expansion(p, w.N, w, n_max, n_samples, seed,
                              workers=workers, mutator=mut)
    _write_csv(out_dir / "expansion.csv", ["n", "a_hat", "se"], agg.csv_rows())
    summary = {
        "p": agg.p, "N": agg.N, "window": agg.window, "n_max": agg.n_max,
        "n_samples": agg.n_samples, "n_used": agg.n_used,
        "n_excluded_margin": agg.n_excluded_margin, "seed": agg.seed,
        "total": agg.total, "total_se": agg.total_se,
        "direct": agg.direct, "direct_se": agg.direct_se, "diff_se": agg.diff_se,
        "decay": None if agg.decay is None else {
            "c_hat": agg.decay.c_hat, "c_upper95": agg.decay.c_upper95,
            "passes": agg.decay.passes, "n_used": agg.decay.n_used,
            "complexity_ok": agg.decay.complexity_ok,
        },
    }
    _write_json(out_dir / "expansion_summary.json", summary)
    return (["expansion.csv", "expansion_summary.json"],
            {"margin": agg.n_excluded_margin}, 0)


def _run_estimate(manifest, out_dir, workers):
    quantity = _need(manifest, "quantity")
    if quantity not in QUANTITIES:
        raise ManifestError(f"unknown quantity {quantity!r}")
    w = _window(manifest)
    seed = _get_int(manifest, "seed", 0)
    n_samples = _get_int(manifest, "n_samples")
    p = _get_float(manifest, "p")
    outputs = []
    if quantity in ("theta", "kappa"):
        fn = theta_hat if quantity == "theta" else kappa_hat
        rep = fn(p, w, n_samples, seed, workers=workers)
        _write_json(out_dir / "estimate.json", json.loads(rep.to_json()))
        outputs.append("estimate.json")
    elif quantity == "chi_f":
        rep = chi_f_hat(_get_int(manifest, "k", 1), p, w, n_samples, seed, workers=workers)
        _write_json(out_dir / "estimate.json", json.loads(rep.to_json()))
        outputs.append("estimate.json")
    elif quantity in ("tau", "tau_f"):
        xs = _parse_tuple(_need(manifest, "x"))
        rep = tau_hat(xs, p, w, n_samples, seed,
                      truncated=quantity == "tau_f", workers=workers)
        _write_json(out_dir / "estimate.json", json.loads(rep.to_json()))
        outputs.append("estimate.json")
    elif quantity == "kappa_derivative":
        rep = kappa_derivative_check(p, _get_float(manifest, "h"), w, n_samples,
                                     seed, workers=workers)
        _write_json(out_dir / "estimate.json", rep.__dict__)
        outputs.append("estimate.json")
    elif quantity == "histogram":
        stats = origin_cluster_statistics(p, w, n_samples, seed, workers=workers)
        hist = stats.histogram()
        _write_csv(out_dir / "histogram.csv", ["n", "p_n"],
                   [(n, float(v)) for n, v in sorted(hist.items())])
        _write_json(out_dir / "estimate.json", {
            "quantity": "histogram", "p": stats.p, "window": stats.window,
            "n_samples": stats.n_samples, "seed": stats.seed,
            "theta": stats.theta, "normalization": stats.theta + sum(hist.values()),
        })
        outputs.extend(["histogram.csv", "estimate.json"])
    elif quantity == "tau_f_decay":
        direction = [int(c) for c in _need(manifest, "direction").replace(",", " ").split()]
        rep = tau_f_decay(p, w, direction, _get_int(manifest, "max_dist", 10),
                          n_samples, seed, workers=workers)
        _write_csv(out_dir / "tau_f_decay.csv",
                   ["r", "estimate", "ci_low", "ci_high", "successes"],
                   list(zip(rep.distances, map(float, rep.estimates),
                            map(float, rep.ci_low), map(float, rep.ci_high),
                            rep.successes)))
        _write_json(out_dir / "estimate.json", {
            "quantity": "tau_f_decay", "p": rep.p, "window": rep.window,
            "direction": rep.direction, "n_samples": rep.n_samples,
            "seed": rep.seed, "c2_hat": rep.c2_hat, "c2_se": rep.c2_se,
            "fitted_range": list(rep.fitted_range) if rep.fitted_range else None,
        })
        outputs.extend(["tau_f_decay.csv", "estimate.json"])
    elif quantity == "good_probability":
        est = good_probability(p, w.N, w, n_samples, seed, workers=workers)
        _write_json(out_dir / "estimate.json", est.__dict__)
        outputs.append("estimate.json")
    return outputs, {}, 0


def _run_counting(manifest, out_dir, workers):
    d = _get_int(manifest, "d", 2)
    mode = manifest.get("mode", "axis")
    n_max = _get_int(manifest, "animal_n_max", 8)
    census = count_animals(d, mode, n_max)
    _write_csv(out_dir / "counting_animals.csv", ["n", "count", "ratio"],
               census.csv_rows())
    table = partitions(_get_int(manifest, "partitions_n_max", 200))
    _write_csv(out_dir / "counting_partitions.csv", ["n", "p_n"], table.csv_rows())
    _write_json(out_dir / "counting_summary.json", {
        "animals": {"d": d, "mode": mode, "n_max": n_max,
                    "mu_last": census.mu_last,
                    "mu_extrapolated": census.mu_extrapolated},
        "partitions": {"n_max": table.n_max, "fitted_r": table.fitted_r()},
    })
    return (["counting_animals.csv", "counting_partitions.csv",
             "counting_summary.json"], {}, 0)


def _run_verify(manifest, out_dir, workers):
    suite = manifest.get("suite", "all")
    if suite not in SUITES:
        raise ManifestError(f"unknown suite {suite!r}")
    seed = _get_int(manifest, "seed", 0)
    payload = {}
    failed = False
    exclusions = {}
    if suite in ("structure", "all"):
        w = _window(manifest)
        rep = run_structure_suite(
            w, _get_float(manifest, "p"), _get_int(manifest, "n_samples"),
            seed=seed, conditioned=_get_bool(manifest, "conditioned"),
            workers=workers,
        )
        payload["structure"] = rep.summary()
        exclusions["structure_margin"] = rep.n_margin_excluded
        failed |= not rep.ok
    if suite in ("expansion", "all"):
        rep = run_expansion_suite(seed=seed, workers=workers)
        payload["expansion"] = rep.summary()
        failed |= not rep.ok
    if suite in ("counting", "all"):
        rep = run_counting_suite(seed=seed, workers=workers)
        payload["counting"] = rep.summary()
        failed |= not rep.ok
    _write_json(out_dir / "verify_report.json", payload)
    return ["verify_report.json"], exclusions, 1 if failed else 0


_HANDLERS = {
    "sample": _run_sample,
    "classify": _run_classify,
    "tails": _run_tails,
    "expansion": _run_expansion,
    "estimate": _run_estimate,
    "counting": _run_counting,
    "verify": _run_verify,
}


def run(manifest: dict, out_dir, workers: int | None = None) -> int:
    """Execute the experiment a manifest describes; returns the exit code."""
    t0 = time.time()
    try:
        if manifest.get("schema_version") != SCHEMA_VERSION:
            raise ManifestError(
                f"schema_version must be {SCHEMA_VERSION!r}, got {manifest.get('schema_version')!r}"
            )
        kind = _need(manifest, "kind")
        if kind not in KINDS:
            raise ManifestError(f"unknown kind {kind!r}")
        n_workers = workers if workers is not None else _get_int(manifest, "workers", 1)
        if n_workers < 1:
            raise ManifestError("workers must be >= 1")
        out = Path(out_dir)
        digest = manifest_hash(manifest)
        summary_path = out / "run_summary.json"
        if summary_path.exists():
            old = json.loads(summary_path.read_text())
            if old.get("manifest_sha256") != digest:
                print(
                    "refusing replay: existing outputs were produced by a different manifest",
                    file=sys.stderr,
                )
                return USAGE_ERROR
        out.mkdir(parents=True, exist_ok=True)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return USAGE_ERROR

    status = 0
    outputs: list = []
    exclusions: dict = {}
    error = None
    try:
        outputs, exclusions, status = _HANDLERS[kind](manifest, out, n_workers)
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except InsufficientData as exc:
        error = f"insufficient data: {exc}"
        status = 2
    except InvariantViolation as exc:
        error = f"invariant violation: {exc}"
        status = 1
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "manifest": {k: manifest[k] for k in sorted(manifest)},
        "manifest_sha256": digest,
        "seed": manifest.get("seed", "0"),
        "outputs": sorted(outputs),
        "exclusions": exclusions,
        "status": status,
        "error": error,
    }
    _write_json(summary_path, summary)
    # timing and worker count vary across reruns; they stay outside the
    # deterministic output contract
    _write_json(out / "run_log.json", {
        "wall_time_s": time.time() - t0,
        "workers_requested": n_workers,
        "finished_unix": time.time(),
    })
    if error:
        print(error, file=sys.stderr)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="percolab",
        description="Manifest-driven percolation experiments and verification suites.",
        exit_on_error=False,
    )
    parser.add_argument("--manifest", required=True, help="path to a key = value manifest")
    parser.add_argument("--seed", type=int, default=None, help="override the manifest seed")
    parser.add_argument("--workers", type=int, default=None, help="worker threads")
    parser.add_argument("--out", required=True, help="output directory")
    try:
        args = parser.parse_args(argv)
    except argparse.ArgumentError:
        return USAGE_ERROR
    except SystemExit as exc:
        return 0 if exc.code == 0 else USAGE_ERROR
    try:
        manifest = load_manifest(args.manifest)
    except FileNotFoundError:
        print(f"manifest not found: {args.manifest}", file=sys.stderr)
        return USAGE_ERROR
    except ManifestError as exc:
        print(f"manifest error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if args.seed is not None:
        manifest["seed"] = str(args.seed)
    return run(manifest, args.out, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
