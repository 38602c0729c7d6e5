"""Experiment orchestration: config parsing, grid search, CSV emission.

One experiment fans out into cells, one per (algorithm, reward model, c,
seed). Every cell writes a per-round metrics CSV; the experiment writes a
summary row per cell, a best-per-algorithm table (max clicks over the c
grid), and a significance report pairing the standard and exposure-aware
reward models per (algorithm, c, seed) via McNemar's test.

Exit codes: 0 success, 1 config error, 2 data error, 3 some cells failed
(partial results written).
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import InteractionMatrix, binarize, load_ratings, split_train_test, subsample
from .metrics import ExposureLedger, ei, eo, ingest_round, item_coverage, mcnemar
from .simulate import (
    ALGORITHMS,
    REWARD_MODELS,
    RoundLog,
    SimConfig,
    SimWorld,
    build_world,
    run,
)

log = logging.getLogger(__name__)

SIGNIFICANCE_LEVEL = 0.1
_REWARD_ALIASES = {"ea": "exposure_aware", "std": "standard"}


class ConfigError(Exception):
    """Invalid experiment specification."""


class DataError(Exception):
    """Dataset could not be loaded or preprocessed."""


def _canon_reward(name: str) -> str:
    name = _REWARD_ALIASES.get(name.strip(), name.strip())
    if name not in REWARD_MODELS:
        raise ConfigError(f"unknown reward model {name!r}")
    return name


@dataclass
class ExperimentSpec:
    """Everything needed to run one experiment grid."""

    ratings_path: str
    genres_path: str | None = None
    fmt: str = "csv"
    name: str = "experiment"
    # preprocessing
    threshold: float = 4.0
    core: int = 0
    top_users: int | None = 1000
    top_items: int | None = None
    ratio: float = 0.5
    # simulation
    T: int = 50000
    K: int = 20
    gamma: float = 5e-5
    lam: float = 1.0
    d_latent: int = 10
    shared_model: bool = False
    algorithms: tuple[str, ...] = ALGORITHMS
    rewards: tuple[str, ...] = REWARD_MODELS
    c_grid: tuple[float, ...] = (0.01, 0.25, 0.5, 1.0)
    seeds: tuple[int, ...] = (0,)
    # output
    out_dir: str = "results"
    eval_every: int = 100
    workers: int = 1

    def __post_init__(self) -> None:
        self.rewards = tuple(_canon_reward(r) for r in self.rewards)
        if not self.c_grid:
            raise ConfigError("c grid is empty")
        if not self.seeds:
            raise ConfigError("seed list is empty")
        if not self.algorithms:
            raise ConfigError("algorithm list is empty")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        if self.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def cells(self) -> list[tuple[str, str, float, int]]:
        """Grid cells in declaration order."""
        return [
            (algo, reward, c, seed)
            for algo in self.algorithms
            for reward in self.rewards
            for c in self.c_grid
            for seed in self.seeds
        ]


@dataclass
class CellResult:
    """Per-cell outputs kept in memory for summary and significance tables."""

    algorithm: str
    reward: str
    c: float
    seed: int
    rows: list[tuple[int, int, float, float, float]]
    clicks: int
    eo: float
    ei: float
    ic: float
    users: np.ndarray
    clicked: np.ndarray


@dataclass
class ExperimentResult:
    out_dir: Path
    results: list[CellResult] = field(default_factory=list)
    failures: list[tuple[tuple, str]] = field(default_factory=list)


def _fmt(x: float) -> str:
    return format(x, ".10g")


def cell_name(algorithm: str, reward: str, c: float, seed: int) -> str:
    reward_tag = "ea" if reward == "exposure_aware" else reward
    return f"{algorithm}_{reward_tag}_c{c:g}_seed{seed}"


def run_cell(config: SimConfig, world: SimWorld, eval_every: int) -> CellResult:
    """Run one simulation cell, accumulating the exposure ledger as it streams.

    Metric rows are emitted every ``eval_every`` rounds and at the final
    round; each uses the cumulative ledger from round 1 to that round, so the
    last row equals the cell summary exactly.
    """
    ledger = ExposureLedger.empty(world.n_items)
    rows: list[tuple[int, int, float, float, float]] = []
    users = np.empty(config.T, dtype=np.int64)
    clicked = np.zeros(config.T, dtype=bool)
    for entry in run(config, world):
        ingest_round(ledger, entry)
        users[entry.round - 1] = entry.user
        clicked[entry.round - 1] = entry.click_index is not None
        if entry.round % eval_every == 0 or entry.round == config.T:
            rows.append(
                (entry.round, ledger.clicks, eo(ledger), ei(ledger), item_coverage(ledger))
            )
    return CellResult(
        algorithm=config.algorithm,
        reward=config.reward_model,
        c=config.c,
        seed=config.seed,
        rows=rows,
        clicks=ledger.clicks,
        eo=eo(ledger),
        ei=ei(ledger),
        ic=item_coverage(ledger),
        users=users,
        clicked=clicked,
    )


def _schedule_report(
    users_a: np.ndarray, clicked_a: np.ndarray, users_b: np.ndarray, clicked_b: np.ndarray
) -> dict:
    if len(users_a) != len(users_b):
        raise ValueError(
            f"schedule mismatch: runs cover {len(users_a)} vs {len(users_b)} rounds"
        )
    if not np.array_equal(users_a, users_b):
        raise ValueError("schedule mismatch: runs saw different user sequences")
    result = mcnemar(clicked_a, clicked_b)
    n01 = int(np.count_nonzero(~clicked_a & clicked_b))
    n10 = int(np.count_nonzero(clicked_a & ~clicked_b))
    return {
        "n01": n01,
        "n10": n10,
        "statistic": result.statistic,
        "p_value": result.p_value,
        "significant": bool(result.p_value < SIGNIFICANCE_LEVEL),
        "degenerate": result.degenerate,
    }


def compare_runs(
    logs_a: Sequence[RoundLog], logs_b: Sequence[RoundLog]
) -> dict:
    """McNemar significance report for two runs sharing a round schedule."""
    users_a = np.array([e.user for e in logs_a])
    users_b = np.array([e.user for e in logs_b])
    clicked_a = np.array([e.click_index is not None for e in logs_a])
    clicked_b = np.array([e.click_index is not None for e in logs_b])
    return _schedule_report(users_a, clicked_a, users_b, clicked_b)


def _load_dataset(spec: ExperimentSpec):
    try:
        raw = load_ratings(spec.ratings_path, fmt=spec.fmt, genres_path=spec.genres_path)
        raw = binarize(raw, threshold=spec.threshold)
        return subsample(raw, core=spec.core, top_users=spec.top_users, top_items=spec.top_items)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc


def _cell_task(args) -> CellResult:
    config, world, eval_every = args
    return run_cell(config, world, eval_every)


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Execute every grid cell and write all experiment artifacts.

    A cell failure is recorded and skipped; the remaining cells still run and
    all tables are written from the cells that finished.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    raw = _load_dataset(spec)

    splits: dict[int, tuple[InteractionMatrix, InteractionMatrix]] = {}
    worlds: dict[tuple[str, int], SimWorld] = {}
    jobs = []
    cell_keys = []
    for algo, reward, c, seed in spec.cells():
        try:
            if seed not in splits:
                splits[seed] = split_train_test(raw, ratio=spec.ratio, seed=seed)
            if (algo, seed) not in worlds:
                train, test = splits[seed]
                worlds[(algo, seed)] = build_world(
                    train, test, algo, d_latent=spec.d_latent, lam=spec.lam, seed=seed
                )
        except (ValueError, FloatingPointError) as exc:
            raise DataError(str(exc)) from exc
        config = SimConfig(
            T=spec.T,
            K=spec.K,
            c=c,
            gamma=spec.gamma,
            lam=spec.lam,
            seed=seed,
            algorithm=algo,
            reward_model=reward,
            shared_model=spec.shared_model,
            d_latent=spec.d_latent,
        )
        jobs.append((config, worlds[(algo, seed)], spec.eval_every))
        cell_keys.append((algo, reward, c, seed))

    outcome = ExperimentResult(out_dir=out_dir)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_cell_task, job) for job in jobs]
            raw_results = []
            for key, fut in zip(cell_keys, futures):
                try:
                    raw_results.append(fut.result())
                except Exception as exc:  # cell isolation
                    raw_results.append(exc)
                    log.error("cell %s failed: %s", key, exc)
    else:
        raw_results = []
        for key, job in zip(cell_keys, jobs):
            try:
                raw_results.append(_cell_task(job))
            except Exception as exc:
                raw_results.append(exc)
                log.error("cell %s failed: %s", key, exc)

    for key, res in zip(cell_keys, raw_results):
        if isinstance(res, Exception):
            outcome.failures.append((key, str(res)))
            continue
        outcome.results.append(res)
        _write_cell_csv(out_dir / f"{cell_name(*key)}.csv", res)

    _write_summary(out_dir / "summary.csv", outcome.results)
    _write_best(out_dir / "best.csv", spec, outcome.results)
    _write_significance(out_dir / "significance.csv", spec, outcome.results)
    return outcome


def _write_cell_csv(path: Path, res: CellResult) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("round,clicks_cum,EO,EI,IC\n")
        for rnd, clicks, eo_v, ei_v, ic_v in res.rows:
            fh.write(f"{rnd},{clicks},{_fmt(eo_v)},{_fmt(ei_v)},{_fmt(ic_v)}\n")


def _write_summary(path: Path, results: list[CellResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("algorithm,reward,c,seed,clicks,EO,EI,IC\n")
        for r in results:
            fh.write(
                f"{r.algorithm},{r.reward},{r.c:g},{r.seed},"
                f"{r.clicks},{_fmt(r.eo)},{_fmt(r.ei)},{_fmt(r.ic)}\n"
            )


def _write_best(path: Path, spec: ExperimentSpec, results: list[CellResult]) -> None:
    """Best c per (algorithm, reward) by mean clicks over seeds."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("algorithm,reward,c,clicks,EO,EI,IC\n")
        for algo in spec.algorithms:
            for reward in spec.rewards:
                best = None
                for c in spec.c_grid:
                    cells = [
                        r
                        for r in results
                        if (r.algorithm, r.reward, r.c) == (algo, reward, c)
                    ]
                    if not cells:
                        continue
                    means = (
                        float(np.mean([r.clicks for r in cells])),
                        float(np.mean([r.eo for r in cells])),
                        float(np.mean([r.ei for r in cells])),
                        float(np.mean([r.ic for r in cells])),
                    )
                    if best is None or means[0] > best[1][0]:
                        best = (c, means)
                if best is None:
                    continue
                c, (clicks, eo_v, ei_v, ic_v) = best
                fh.write(
                    f"{algo},{reward},{c:g},{_fmt(clicks)},"
                    f"{_fmt(eo_v)},{_fmt(ei_v)},{_fmt(ic_v)}\n"
                )


def _write_significance(
    path: Path, spec: ExperimentSpec, results: list[CellResult]
) -> None:
    """Pair standard vs exposure-aware cells on the same (algorithm, c, seed)."""
    if not {"standard", "exposure_aware"} <= set(spec.rewards):
        return
    index = {(r.algorithm, r.reward, r.c, r.seed): r for r in results}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("algorithm,c,seed,n01,n10,statistic,p_value,significant\n")
        for algo in spec.algorithms:
            for c in spec.c_grid:
                for seed in spec.seeds:
                    a = index.get((algo, "standard", c, seed))
                    b = index.get((algo, "exposure_aware", c, seed))
                    if a is None or b is None:
                        continue
                    rep = _schedule_report(a.users, a.clicked, b.users, b.clicked)
                    fh.write(
                        f"{algo},{c:g},{seed},{rep['n01']},{rep['n10']},"
                        f"{_fmt(rep['statistic'])},{_fmt(rep['p_value'])},"
                        f"{int(rep['significant'])}\n"
                    )


# ---------------------------------------------------------------------------
# config file + flags


def _parse_list(value: str) -> list[str]:
    return [tok for tok in value.replace(",", " ").split() if tok]


def _spec_from_section(section: configparser.SectionProxy, name: str) -> ExperimentSpec:
    def get(key, default=None):
        return section.get(key, default)

    try:
        spec = ExperimentSpec(
            ratings_path=section.get("ratings", fallback=None) or _missing("ratings"),
            genres_path=get("genres"),
            fmt=get("format", "csv"),
            name=name,
            threshold=section.getfloat("threshold", 4.0),
            core=section.getint("core", 0),
            top_users=_opt_int(get("top_users", "1000")),
            top_items=_opt_int(get("top_items", "")),
            ratio=section.getfloat("ratio", 0.5),
            T=section.getint("T", 50000),
            K=section.getint("K", 20),
            gamma=section.getfloat("gamma", 5e-5),
            lam=section.getfloat("lambda", 1.0),
            d_latent=section.getint("d", 10),
            shared_model=section.getboolean("shared_model", False),
            algorithms=tuple(_parse_list(get("algorithms", "lsb linucb hybrid"))),
            rewards=tuple(_parse_list(get("rewards", "standard ea"))),
            c_grid=tuple(float(x) for x in _parse_list(get("c_grid", "0.01 0.25 0.5 1"))),
            seeds=tuple(int(x) for x in _parse_list(get("seeds", "0"))),
            out_dir=get("out", "results"),
            eval_every=section.getint("eval_every", 100),
            workers=section.getint("workers", 1),
        )
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"section [{name}]: {exc}") from exc
    return spec


def _missing(key: str):
    raise ConfigError(f"required key {key!r} missing")


def _opt_int(value: str | None) -> int | None:
    if value is None or value.strip() in {"", "none", "inf"}:
        return None
    return int(value)


def load_specs(path: str | Path) -> list[ExperimentSpec]:
    """Parse a declarative config file: one experiment per section."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if not parser.sections():
        raise ConfigError(f"config file {path} declares no experiment sections")
    return [_spec_from_section(parser[name], name) for name in parser.sections()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cascadefair",
        description="Cascading-bandit exposure bias experiments",
    )
    p.add_argument("--config", help="declarative experiment file (one section per experiment)")
    p.add_argument("--dataset", help="ratings file: user,item,rating")
    p.add_argument("--genres", help="item metadata file: item,genre1|genre2|...")
    p.add_argument("--format", choices=["csv", "tsv"], default=None)
    p.add_argument("--algo", choices=list(ALGORITHMS), help="restrict to one algorithm")
    p.add_argument("--reward", choices=["standard", "ea"], help="restrict to one reward model")
    p.add_argument("--T", type=int, default=None, help="rounds")
    p.add_argument("--K", type=int, default=None, help="list size")
    p.add_argument("--c", type=float, default=None, help="single exploration constant")
    p.add_argument("--gamma", type=float, default=None, help="no-click penalty scale")
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="ridge strength")
    p.add_argument("--seed", type=int, default=None, help="single seed")
    p.add_argument("--d", type=int, default=None, help="latent dimension")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--core", type=int, default=None)
    p.add_argument("--top-users", type=int, default=None)
    p.add_argument("--top-items", type=int, default=None)
    p.add_argument("--ratio", type=float, default=None)
    p.add_argument("--eval-every", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--shared-model", action="store_true", default=None)
    p.add_argument(
        "--desk",
        action="store_true",
        help="desk-scale preset: T=10000, K=10 (overridden by explicit --T/--K)",
    )
    return p


def _apply_flags(spec: ExperimentSpec, args: argparse.Namespace) -> ExperimentSpec:
    updates = {}
    if args.desk:
        updates["T"], updates["K"] = 10000, 10
    direct = {
        "dataset": "ratings_path",
        "genres": "genres_path",
        "format": "fmt",
        "T": "T",
        "K": "K",
        "gamma": "gamma",
        "lam": "lam",
        "d": "d_latent",
        "out": "out_dir",
        "threshold": "threshold",
        "core": "core",
        "top_users": "top_users",
        "top_items": "top_items",
        "ratio": "ratio",
        "eval_every": "eval_every",
        "workers": "workers",
        "shared_model": "shared_model",
    }
    for arg_name, field_name in direct.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            updates[field_name] = value
    if args.algo is not None:
        updates["algorithms"] = (args.algo,)
    if args.reward is not None:
        updates["rewards"] = (_canon_reward(args.reward),)
    if args.c is not None:
        updates["c_grid"] = (args.c,)
    if args.seed is not None:
        updates["seeds"] = (args.seed,)
    try:
        return replace(spec, **updates)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            specs = [_apply_flags(s, args) for s in load_specs(args.config)]
        elif args.dataset:
            base = ExperimentSpec(ratings_path=args.dataset)
            specs = [_apply_flags(base, args)]
        else:
            raise ConfigError("either --config or --dataset is required")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    any_cell_failed = False
    for spec in specs:
        base_out = Path(spec.out_dir)
        if len(specs) > 1:
            spec = replace(spec, out_dir=str(base_out / spec.name))
        try:
            result = run_experiment(spec)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
        except DataError as exc:
            print(f"data error: {exc}", file=sys.stderr)
            return 2
        for key, message in result.failures:
            any_cell_failed = True
            print(f"cell {cell_name(*key)} failed: {message}", file=sys.stderr)
        print(
            f"{spec.name}: {len(result.results)} cells written to {result.out_dir}"
            + (f" ({len(result.failures)} failed)" if result.failures else "")
        )
    return 3 if any_cell_failed else 0


if __name__ == "__main__":
    sys.exit(main())
