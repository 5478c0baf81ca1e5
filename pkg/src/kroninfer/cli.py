"""``kroninfer`` command line: gen, infer and the three figure datasets."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .errors import (
    CapacityError,
    DivergenceError,
    MalformedInputError,
    ParameterError,
    ShapeError,
)
from .formats import EdgeWriter, edge_header, load_sample, write_kten, write_sidecar
from .kron_graph import (
    GraphSample,
    build_initiator,
    kronecker_power,
    random_sparse_permutation,
    sample_adjacency,
    sample_adjacency_streaming,
)
from .pipeline import SWEEP_X, RunConfig, infer

EXIT_OK, EXIT_IO, EXIT_DIVERGENCE, EXIT_MALFORMED, EXIT_USAGE = 0, 2, 3, 4, 64

SPECTRUM_DEFAULT_SIZES = [4096]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _rank_cap(text: str):
    if text == "listing":
        return text
    try:
        return int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer or 'listing', got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=_int_list, help="seed, or comma list of seeds for sweeps")
    common.add_argument("--sizes", type=_int_list, help="comma list of flattened sizes d")
    common.add_argument("--jobs", type=int, help="concurrent sweep points")
    common.add_argument("--m", type=int)
    common.add_argument("--l", type=int)
    common.add_argument("--K", type=int)
    common.add_argument("--p", type=float)
    common.add_argument("--x", type=_float_list, help="row-major mat(X), q^2 values")
    common.add_argument("--rank-cap", dest="rank_cap", type=_rank_cap,
                        help="singular values to shrink: an integer or 'listing' for (d-1)K+1")

    parser = _Parser(prog="kroninfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    gen = sub.add_parser("gen", parents=[common], help="sample a graph to an edge list")
    gen.add_argument("--flat", action="store_true", help="write 'u v' flattened labels")
    gen.add_argument("--dense", action="store_true", help="also write the dense KTEN1 adjacency")
    inf = sub.add_parser("infer", parents=[common], help="estimate p and X")
    inf.add_argument("--input", type=Path, help="edge list or KTEN1 file; sampled from the config if absent")
    inf.add_argument("--timing", action="store_true", help="include wall time in the JSON")
    for name in ("fig-shrinkage", "fig-opnorm", "fig-spectrum"):
        sub.add_parser(name, parents=[common], help=f"{name[4:]} dataset")
    return parser


def resolve_config(args) -> tuple[RunConfig, set]:
    """Config file overlaid with flags; also returns which keys were set explicitly."""
    raw = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            raise MalformedInputError(f"{args.config}: invalid JSON") from exc
        if not isinstance(raw, dict):
            raise MalformedInputError(f"{args.config}: config must be a JSON object")
    explicit = set(raw)
    for key in ("m", "l", "K", "p", "x", "sizes", "jobs", "rank_cap"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
            explicit.add(key)
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    if args.seed is not None:
        raw["seed"], raw["seeds"] = args.seed[0], args.seed
        explicit |= {"seed", "seeds"}
    if "sizes" not in raw and args.command in ("gen", "infer"):
        raw["sizes"] = []  # the sweep default need not be powers of q
    cfg = RunConfig.from_dict(raw)
    if cfg.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    return cfg, explicit


def _single_size(cfg: RunConfig, explicit: set) -> RunConfig:
    if "sizes" in explicit and cfg.sizes:
        if len(cfg.sizes) != 1:
            raise UsageError("gen and infer take a single size")
        return dataclasses.replace(cfg, K=cfg.K_for(cfg.sizes[0]))
    return cfg


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen(args) -> int:
    cfg, explicit = resolve_config(args)
    cfg = _single_size(cfg, explicit)
    params = cfg.params()
    params.validate()
    out = _out_dir(cfg)
    perm = random_sparse_permutation(params.d, cfg.permutation_s, cfg.seed)
    edges_path = out / "graph.edges"
    if args.dense:
        pk = kronecker_power(build_initiator(params), params.K)
        sample = sample_adjacency(pk, cfg.seed, perm)
        sample.truth = params
        with open(edges_path, "w") as fh:
            fh.write(edge_header(params.d, params.m, params.l, params.K, cfg.seed) + "\n")
            u, v = np.nonzero(sample.adjacency.matrix)
            EdgeWriter(fh, params.n, args.flat)(u, v)
        count = int(u.size)
        write_kten(out / "graph.kten", sample.adjacency)
    else:
        sample = GraphSample(None, perm, cfg.seed, params)
        with open(edges_path, "w") as fh:
            fh.write(edge_header(params.d, params.m, params.l, params.K, cfg.seed) + "\n")
            count = sample_adjacency_streaming(params, cfg.seed, EdgeWriter(fh, params.n, args.flat), perm)
    write_sidecar(out / "graph.edges.json", sample)
    density = count / params.d**2
    print(f"d={params.d} edges={count} density={density:.6f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg, explicit = resolve_config(args)
    if "K" not in explicit and "sizes" not in explicit:
        raise UsageError("infer needs --K (or K in the config)")
    cfg = _single_size(cfg, explicit)
    if args.input is not None:
        sample = load_sample(args.input)
        header = sample.meta.get("header", {})
        if header.get("K", cfg.K) != cfg.K:
            raise MalformedInputError(f"{args.input}: file has K={header['K']}, requested K={cfg.K}")
    else:
        sample = cfg.sample()
    if {"m", "l"} & explicit and (cfg.m**cfg.K, cfg.l**cfg.K) != tuple(sample.adjacency.row_dims):
        raise ShapeError(f"adjacency {sample.adjacency.row_dims} does not match m={cfg.m}, l={cfg.l}, K={cfg.K}")
    result = infer(sample, cfg.K, cfg.solve_config(sample.d), cfg.rank_cap)
    out = _out_dir(cfg)
    write_kten(out / "estimate.kten", result.denoise.estimate)
    payload = result.to_dict(include_timing=args.timing)
    payload["estimate"] = "estimate.kten"
    payload["seed"] = sample.seed
    payload["solver"] = cfg.solve_config(sample.d).to_dict()
    (out / "result.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    x = ", ".join(f"{v:.4f}" for v in result.x_hat)
    print(f"p_hat={result.p_hat:.6f} x_hat=[{x}] kept={result.denoise.kept}")
    return EXIT_OK


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_rows(path: Path, columns: list[str], rows: list[dict], fmt: str) -> Path:
    if fmt == "json":
        path = path.with_suffix(".json")
        path.write_text(json.dumps([{c: r[c] for c in columns} for r in rows], indent=1) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in rows:
            writer.writerow([_fmt(r[c]) for c in columns])
    return path


def _sweep(args, fn, default_sizes=None, default_x=None):
    cfg, explicit = resolve_config(args)
    sizes = cfg.sizes if ("sizes" in explicit or default_sizes is None) else default_sizes
    if default_x is not None and "x" not in explicit and (cfg.m, cfg.l) == (2, 1):
        cfg = dataclasses.replace(cfg, x=list(default_x))
    return cfg, experiments.run_grid(fn, cfg, sizes, cfg.seeds, cfg.jobs)


def cmd_fig_shrinkage(args) -> int:
    cfg, rows = _sweep(args, experiments.shrinkage_point, default_x=SWEEP_X)
    path = write_rows(_out_dir(cfg) / "fig_shrinkage.csv",
                      ["d", "seed", "empirical_error", "theory_error"], rows, cfg.format)
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_fig_opnorm(args) -> int:
    cfg, rows = _sweep(args, experiments.opnorm_point, default_x=SWEEP_X)
    path = write_rows(_out_dir(cfg) / "fig_opnorm.csv", ["d", "seed", "opnorm_residual"], rows, cfg.format)
    print(f"wrote {len(rows)} rows to {path}")
    return EXIT_OK


def cmd_fig_spectrum(args) -> int:
    cfg, points = _sweep(args, experiments.spectrum_point, SPECTRUM_DEFAULT_SIZES)
    out = _out_dir(cfg)
    values = [r for pt in points for r in pt["values"]]
    spikes = [r for pt in points for r in pt["spikes"]]
    write_rows(out / "fig_spectrum.csv", ["d", "seed", "singular_value_normalized"], values, cfg.format)
    write_rows(out / "fig_spectrum_law.csv", ["x", "pdf"], experiments.law_table(), cfg.format)
    write_rows(out / "fig_spectrum_spikes.csv", ["d", "seed", "ell", "predicted_location"], spikes, cfg.format)
    print(f"wrote {len(values)} singular values and {len(spikes)} predicted spikes to {out}")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "infer": cmd_infer,
    "fig-shrinkage": cmd_fig_shrinkage,
    "fig-opnorm": cmd_fig_opnorm,
    "fig-spectrum": cmd_fig_spectrum,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"kroninfer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"kroninfer: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (MalformedInputError, ParameterError, ShapeError, CapacityError) as exc:
        print(f"kroninfer: invalid input: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except OSError as exc:
        print(f"kroninfer: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
