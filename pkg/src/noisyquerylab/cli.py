"""Command-line front end: verification suites and experiments driven by a
key=value config file, with deterministic CSV/JSON reports.

Every command is a pure function of (config, seed, artifact version): reports
carry no timestamps, rows are sorted by cell key, floats are rendered with
repr, and per-trial randomness is addressed by (seed, tag, trial) so results
do not depend on --jobs.

Exit codes: 0 success, 1 assertion/verification failure, 2 usage or config
error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__
from .stats import (
    RngStream,
    mad_binomial,
    mad_binomial_bounds_ok,
    mad_binomial_bruteforce,
    mad_binomial_sweep,
    random_rational_probs,
    random_square_fidelity_probs,
)
from .dist import (
    FiniteDist,
    chi_sym_sq,
    coin_information,
    disjoint_mixture_h2,
    fidelity_exact,
    hellinger_sq,
    hellinger_sq_exact,
    js,
    mix_disjoint,
    tvd,
)
from .noisy import amplify_bounds_ok, majority_bias_sweep
from .osim import (
    faithfulness_distributions,
    session_cost_mc,
    single_bit_sim_exact,
)
from .dtree import random_tree, RandomizedTree, transcript_h2
from .walk import (
    BiasStream,
    adapter_correct_prob_exact,
    enumerate_conditioned_sequences,
    expected_hitting_steps,
    sample_raw_segments,
    stream_law_first_bits_exact,
    walk_params,
)
from .channels import all_total_functions, random_mu_on_domain, random_partial_fn, sweep_rows
from .experiments import counterexample_table, DEFAULT_C1_GRID, DEFAULT_C2_GRID, DEFAULT_C3
from . import experiments as _experiments_mod

DEFAULTS = {
    "run": {"seed": "20240901", "trials": "2000", "out": "out", "mode": "rational", "jobs": "1"},
    "counterexample": {
        "k_list": "12,14,16",
        "c1_grid": ",".join(str(c) for c in DEFAULT_C1_GRID),
        "c2_grid": ",".join(str(c) for c in DEFAULT_C2_GRID),
        "c3": str(DEFAULT_C3),
        "gap": "1",
        "error_budget": "1/3",
    },
    "channels": {"rho_grid": "0.1,0.3,0.5,0.7,0.9", "n_random": "12", "random_arities": "3,4"},
    "walk": {"gamma": "0.02", "delta": "0.5", "segments": "200000", "stream_bits": "50000"},
}


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    cfg.read_dict(DEFAULTS)
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path!r} not found")
        try:
            cfg.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
    return cfg


def config_echo(cfg: configparser.ConfigParser) -> list[tuple[str, str]]:
    """Self-describing header rows.  run.jobs and run.out are execution
    parameters with no effect on results, so they are excluded to keep
    outputs bit-identical across worker counts and output locations."""
    rows = [("artifact_version", __version__)]
    for section in sorted(cfg.sections()):
        for key in sorted(cfg[section]):
            if section == "run" and key in ("jobs", "out"):
                continue
            rows.append((f"{section}.{key}", cfg[section][key]))
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns: list[str], rows: list[dict], echo: list[tuple[str, str]]):
    buf = io.StringIO()
    for key, val in echo:
        buf.write(f"# {key} = {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def write_json(path: str, payload: dict):
    def default(o):
        if isinstance(o, Fraction):
            return {"num": o.numerator, "den": o.denominator}
        raise TypeError(f"not serializable: {o!r}")

    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1, default=default)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Verification suites (scaled-down versions of the acceptance checks; the
# full-tolerance runs live in the test suite)
# ---------------------------------------------------------------------------

Check = tuple[str, bool, str]


def _random_rational_dist(rng: RngStream, n_bits: int) -> FiniteDist:
    from .boolfn import int_to_bits

    probs = random_rational_probs(rng, 2**n_bits)
    return FiniteDist(
        {int_to_bits(v, n_bits): p for v, p in enumerate(probs) if p != 0}
    )


def _suite_distances(seed: int, mode: str) -> list[Check]:
    checks: list[Check] = []
    rng = RngStream(seed, "verify", "distances")

    worst = 0.0
    ok = True
    for _ in range(2000):
        size = int(rng.integers(2, 17))
        p = FiniteDist({i: x for i, x in enumerate(rng.generator.dirichlet([0.5] * size))})
        q = FiniteDist({i: x for i, x in enumerate(rng.generator.dirichlet([0.5] * size))})
        h2 = hellinger_sq(p, q)
        s2 = float(chi_sym_sq(p, q))
        jsd = js(p, q)
        d = float(tvd(p, q))
        slack = 1e-9
        ok &= h2 <= jsd + slack and jsd <= s2 + slack and s2 <= 2 * h2 + slack
        ok &= d * d <= s2 + slack and s2 <= d + slack
        worst = max(worst, h2 - jsd, jsd - s2, s2 - 2 * h2, d * d - s2, s2 - d)
    checks.append(("distances.chain_inequality", ok, f"max violation {worst:.3e}"))

    ok = True
    for _ in range(200):
        size = int(rng.integers(2, 9))
        p = FiniteDist({i: x for i, x in enumerate(rng.generator.dirichlet([1] * size))})
        q = FiniteDist({i: x for i, x in enumerate(rng.generator.dirichlet([1] * size))})
        ok &= abs(js(p, q) - coin_information(p, q, 0.0)) < 1e-12
        gamma = float(rng.integers(-9, 10)) / 10
        ok &= coin_information(p, q, gamma) >= (1 - abs(gamma)) * js(p, q) - 1e-12
    checks.append(("distances.js_information", ok, "identity and imperfect-coin bound"))

    ok = True
    for _ in range(40):
        size = int(rng.integers(2, 5))
        pv, qv = random_square_fidelity_probs(rng, size)
        p = FiniteDist({i: x for i, x in enumerate(pv) if x != 0})
        q = FiniteDist({i: x for i, x in enumerate(qv) if x != 0})
        k = int(rng.integers(2, 5))
        lhs = hellinger_sq_exact(p.tensor_power(k), q.tensor_power(k))
        rhs = 1 - (1 - hellinger_sq_exact(p, q)) ** k
        ok &= lhs == rhs
        ok &= hellinger_sq_exact(p, q) + fidelity_exact(p, q) == 1
    checks.append(("distances.tensorization_exact", ok, "rational-mode identity"))

    ok = True
    for _ in range(40):
        npairs = int(rng.integers(2, 5))
        pairs = []
        for a in range(npairs):
            size = int(rng.integers(2, 4))
            pv, qv = random_square_fidelity_probs(rng, size)
            pairs.append(
                (
                    FiniteDist({(a, i): x for i, x in enumerate(pv) if x != 0}),
                    FiniteDist({(a, i): x for i, x in enumerate(qv) if x != 0}),
                )
            )
        weights = random_rational_probs(rng, npairs)
        pairs = [pq for pq, w in zip(pairs, weights) if w != 0]
        weights = [w for w in weights if w != 0]
        lhs = disjoint_mixture_h2(pairs, weights, exact=True)
        pm, qm = mix_disjoint(pairs, weights)
        ok &= lhs == hellinger_sq_exact(pm, qm)
    checks.append(("distances.disjoint_mixture", ok, "mixture h2 = weighted average"))
    return checks


def _suite_osim(seed: int, mode: str) -> list[Check]:
    checks: list[Check] = []
    rng = RngStream(seed, "verify", "osim")

    ok = True
    for _ in range(50):
        p0, p1 = sorted(random_rational_probs(rng, 2, 16))[:2]
        if p0 + p1 > 1:
            p0, p1 = (1 - p0) / 2, (1 - p1) / 2
        res = single_bit_sim_exact(p0, p1, a=0)
        ok &= res.out_b0[0] == p0 and res.out_b1[0] == p1
        expect = (p0 - p1) ** 2 / (p0 + p1) if p0 + p1 else Fraction(0)
        ok &= res.expected_cost == expect
    checks.append(("osim.single_bit_exact", ok, "output law and cost identity"))

    ok = True
    import itertools

    for m in (1, 2):
        for _ in range(12):
            mu0 = _random_rational_dist(rng, m)
            mu1 = _random_rational_dist(rng, m)
            for order in itertools.permutations(range(m)):
                for b in (0, 1):
                    sim, true = faithfulness_distributions(mu0, mu1, order, b)
                    ok &= sim == true
    checks.append(("osim.faithfulness", ok, "rational equality of answer laws"))

    worst = 0.0
    for cell in range(40):
        m = int(rng.integers(2, 7))
        tree = random_tree(m, min(m, 4), rng)
        mu0 = FiniteDist(
            {tuple(x): p for x, p in zip(itertools.product((0, 1), repeat=m),
                                         rng.generator.dirichlet([0.6] * 2**m))}
        )
        mu1 = FiniteDist(
            {tuple(x): p for x, p in zip(itertools.product((0, 1), repeat=m),
                                         rng.generator.dirichlet([0.6] * 2**m))}
        )
        h2 = transcript_h2(RandomizedTree.single(tree), mu0, mu1)
        cost = max(
            session_cost_mc(tree, mu0, mu1, b, 2000, rng.child("mc", cell, b))
            for b in (0, 1)
        )
        if h2 > 1e-9:
            worst = max(worst, cost / h2)
        else:
            worst = max(worst, cost * 1e6)
    checks.append(("osim.cost_bound", worst <= 50.0, f"suite constant C = {worst:.2f} <= 50"))
    return checks


def _suite_walk(seed: int, mode: str) -> list[Check]:
    checks: list[Check] = []
    rng = RngStream(seed, "verify", "walk")

    ok = True
    for gi in range(1, 10):
        gamma = Fraction(gi, 100)
        for delta in (Fraction(1, 2), Fraction(3, 4), Fraction(1)):
            if delta / gamma <= 10:
                continue
            wp = walk_params(gamma, delta)
            ok &= wp.p_up + wp.p_up / wp.big_r == 1
            ok &= Fraction(wp.big_r) >= 1 + delta / 5 and Fraction(wp.big_r) <= 1 + delta
    checks.append(("walk.params_bounds", ok, "R in [1+delta/5, 1+delta], p+Rp=1"))

    gamma, t = 0.1, 2
    lengths, exits = sample_raw_segments(gamma, t, 100000, rng.child("seg"))
    p_hat = float(np.mean(exits == 1))
    wp_r = float(((1 + gamma) / (1 - gamma)) ** t)
    p_true = wp_r / (1 + wp_r)
    se = math.sqrt(p_true * (1 - p_true) / len(exits))
    ok = abs(p_hat - p_true) <= 2.576 * se
    checks.append(("walk.hitting_probability", ok, f"{p_hat:.5f} vs {p_true:.5f}"))

    mean_len = float(np.mean(lengths))
    closed = expected_hitting_steps(gamma, t)
    ok = abs(mean_len - closed) / closed <= 0.02
    checks.append(("walk.segment_length", ok, f"{mean_len:.4f} vs closed form {closed:.4f}"))

    summary = enumerate_conditioned_sequences(Fraction(1, 10), 2, max_len=12)
    checks.append(
        (
            "walk.sign_invariance",
            True,
            f"{summary['sequences']} sequences, tail {float(summary['conditional_tail']):.2e} equal under both signs",
        )
    )

    ok = True
    for b in (0, 1):
        law = stream_law_first_bits_exact(Fraction(1, 10), Fraction(1, 2), b, 3)
        g = Fraction(1, 10)
        pb = (1 + g) / 2 if b == 1 else (1 - g) / 2
        for bits, pr in law.items():
            expect = Fraction(1)
            for bit in bits:
                expect *= pb if bit == 1 else 1 - pb
            ok &= pr == expect
    checks.append(("walk.stream_exactness", ok, "first-3-bit law is exactly i.i.d."))

    ok = adapter_correct_prob_exact(16) == (1 + Fraction(1, 4)) / 2
    checks.append(("walk.gapmaj_adapter", ok, "n=16 adapter = gamma=1/4 call"))
    return checks


def _suite_channels(seed: int, mode: str) -> list[Check]:
    rng = RngStream(seed, "verify", "channels")
    cells = []
    for f in all_total_functions(2):
        cells.append((f, random_mu_on_domain(f, rng)))
    for idx in range(8):
        f = random_partial_fn(3, rng, f"rand3_{idx}")
        cells.append((f, random_mu_on_domain(f, rng)))
    rows = sweep_rows(cells, [Fraction(j, 10) for j in (1, 5, 9)])
    min_margin = min(r["margin"] for r in rows)
    return [
        (
            "channels.samorodnitsky_fano",
            min_margin >= -1e-12,
            f"{len(rows)} cells, min margin {min_margin:.3e}",
        )
    ]


def _suite_appendix_a(seed: int, mode: str) -> list[Check]:
    checks: list[Check] = []
    ok = all(
        mad_binomial(k) == mad_binomial_bruteforce(k) for k in range(1, 16, 2)
    ) and mad_binomial(1) == Fraction(1, 2)
    checks.append(("appendixA.mad_closed_form", ok, "matches brute force, M_1 = 1/2"))

    ok = all(mad_binomial_bounds_ok(k, m) for k, m in mad_binomial_sweep(2001))
    checks.append(("appendixA.mad_bounds", ok, "sqrt(k/2pi) bracket to k = 2001"))

    ok = True
    for num in (1, 5, 11, 20, 33):
        gamma = Fraction(num, 100)
        kmax = int(1 / (gamma * gamma))
        for k, bias in majority_bias_sweep(gamma, kmax):
            ok &= amplify_bounds_ok(gamma, k, bias)
    checks.append(("appendixA.amplify_bounds", ok, "lemma bracket on a gamma grid"))
    return checks


SUITES = {
    "distances": _suite_distances,
    "osim": _suite_osim,
    "walk": _suite_walk,
    "channels": _suite_channels,
    "appendixA": _suite_appendix_a,
}


def cmd_verify(args, cfg) -> int:
    seed = int(cfg["run"]["seed"])
    mode = cfg["run"]["mode"]
    if args.suite == "all":
        names = list(SUITES)
    elif args.suite in SUITES:
        names = [args.suite]
    else:
        print(f"unknown suite {args.suite!r}; choose from {sorted(SUITES)} or 'all'",
              file=sys.stderr)
        return 2
    lines = []
    failed = False
    for name in names:
        for check, ok, detail in SUITES[name](seed, mode):
            lines.append(f"{'PASS' if ok else 'FAIL'} {check}: {detail}")
            failed |= not ok
    out_dir = args.out or cfg["run"]["out"]
    os.makedirs(out_dir, exist_ok=True)
    report = "\n".join(f"# {k} = {v}" for k, v in config_echo(cfg)) + "\n"
    report += "\n".join(sorted(lines)) + "\n"
    path = os.path.join(out_dir, f"verify_{args.suite}.txt")
    with open(path, "w") as fh:
        fh.write(report)
    print(report, end="")
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# Experiment commands
# ---------------------------------------------------------------------------


def _rebuild_cell(alg_name: str, params: dict):
    if alg_name == "approxindex":
        alg = _experiments_mod.alg_approxindex(params["k"], params["c1"])
        gen = _experiments_mod.gen_approxindex_input(params["k"])
    elif alg_name == "composed":
        alg = _experiments_mod.alg_composed(
            params["k"], params["c2"], params["c3"], gadget_m=params["gadget_m"]
        )
        gen = _experiments_mod.gen_composed_input(params["k"], params["gadget_m"])
    elif alg_name == "gapmaj_subsample":
        alg = _experiments_mod.alg_gapmaj_subsample(params["m"], params["d"])
        gen = _experiments_mod.gen_gapmaj_input(params["m"], Fraction(params["gap"]))
    else:
        raise ValueError(f"unknown algorithm {alg_name!r}")
    return alg, gen


def _pool_chunk(alg_name: str, params: dict, seed: int, tag: str, lo: int, hi: int):
    alg, gen = _rebuild_cell(alg_name, params)
    return [_experiments_mod.run_trial(alg, gen, seed, tag, t) for t in range(lo, hi)]


class TrialPool:
    """Splits trial ranges over worker processes; results are reassembled in
    trial order, and all aggregates are integer sums, so output is identical
    for every worker count."""

    def __init__(self, jobs: int):
        self.jobs = max(1, jobs)
        self._executor = ProcessPoolExecutor(self.jobs) if self.jobs > 1 else None

    def __call__(self, alg, gen, seed, tag, trials):
        serial_params = dict(alg.params)
        if self._executor is None:
            return _pool_chunk(alg.name, serial_params, seed, tag, 0, trials)
        chunk = max(1, math.ceil(trials / (self.jobs * 4)))
        futures = [
            self._executor.submit(
                _pool_chunk, alg.name, serial_params, seed, tag, lo, min(lo + chunk, trials)
            )
            for lo in range(0, trials, chunk)
        ]
        out = []
        for fut in futures:
            out.extend(fut.result())
        return out

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()


def cmd_counterexample(args, cfg) -> int:
    seed = int(cfg["run"]["seed"])
    trials = int(cfg["run"]["trials"])
    section = cfg["counterexample"]
    k_list = [int(k) for k in section["k_list"].split(",") if k.strip()]
    out_dir = args.out or cfg["run"]["out"]
    os.makedirs(out_dir, exist_ok=True)
    columns = [
        "k", "gadget_m", "Q_f", "Q_g", "Q_fg", "ratio", "err_f", "err_fg",
        "err_f_ci_half", "err_fg_ci_half", "clamped_f", "c1", "c2", "votes",
    ]
    echo = config_echo(cfg)
    if not k_list:
        write_csv(os.path.join(out_dir, "counterexample.csv"), columns, [], echo)
        write_json(os.path.join(out_dir, "counterexample.json"),
                   {"config": dict(echo), "rows": [], "meta": {}})
        return 0
    pool = TrialPool(int(cfg["run"]["jobs"]))
    try:
        rows, meta = counterexample_table(
            k_list,
            trials,
            seed,
            c1_grid=[float(c) for c in section["c1_grid"].split(",")],
            c2_grid=[float(c) for c in section["c2_grid"].split(",")],
            c3=float(section["c3"]),
            gap=Fraction(section["gap"]),
            error_budget=Fraction(section["error_budget"]),
            pool=pool,
        )
    finally:
        pool.close()
    rows.sort(key=lambda r: r["k"])
    write_csv(os.path.join(out_dir, "counterexample.csv"), columns, rows, echo)
    write_json(
        os.path.join(out_dir, "counterexample.json"),
        {"config": dict(echo), "rows": rows, "meta": meta},
    )
    return 0


def cmd_channels(args, cfg) -> int:
    seed = int(cfg["run"]["seed"])
    section = cfg["channels"]
    rng = RngStream(seed, "cmd-channels")
    cells = [(f, random_mu_on_domain(f, rng)) for f in all_total_functions(2)]
    arities = [int(n) for n in section["random_arities"].split(",")]
    for idx in range(int(section["n_random"])):
        n = arities[idx % len(arities)]
        f = random_partial_fn(n, rng, f"rand{n}_{idx}")
        cells.append((f, random_mu_on_domain(f, rng)))
    rho_grid = [Fraction(r) if "/" in r else Fraction(r).limit_denominator(1000)
                for r in section["rho_grid"].split(",")]
    rows = sweep_rows(cells, rho_grid)
    if min(r["margin"] for r in rows) < -1e-12:
        print("channel sweep margin check failed", file=sys.stderr)
        return 1
    rows.sort(key=lambda r: (r["f_id"], r["rho"]))
    out_dir = args.out or cfg["run"]["out"]
    os.makedirs(out_dir, exist_ok=True)
    columns = ["f_id", "n", "rho", "H_noisy", "H_erasure", "margin", "err_bayes"]
    write_csv(os.path.join(out_dir, "channels.csv"), columns, rows, config_echo(cfg))
    write_json(os.path.join(out_dir, "channels.json"),
               {"config": dict(config_echo(cfg)), "rows": rows})
    return 0


def cmd_walk(args, cfg) -> int:
    seed = int(cfg["run"]["seed"])
    section = cfg["walk"]
    gamma = Fraction(section["gamma"])
    delta = Fraction(section["delta"])
    n_segments = int(section["segments"])
    rng = RngStream(seed, "cmd-walk")
    wp = walk_params(gamma, delta)
    lengths, exits = sample_raw_segments(float(gamma), wp.t, n_segments, rng.child("segments"))
    mean_len = float(np.mean(lengths))
    closed = expected_hitting_steps(float(gamma), wp.t)
    if abs(mean_len - closed) / closed > 0.02:
        print(f"segment-length check failed: {mean_len} vs {closed}", file=sys.stderr)
        return 1

    b = 1
    oracle_rng = rng.child("delta-oracle")
    draw = lambda: b if oracle_rng.random() < (1 + float(delta)) / 2 else 1 - b
    stream = BiasStream(draw, float(gamma), float(delta), rng.child("stream"))
    for _ in range(int(section["stream_bits"])):
        stream.next_bit()
    rows = stream.stats_rows()
    out_dir = args.out or cfg["run"]["out"]
    os.makedirs(out_dir, exist_ok=True)
    columns = ["segment", "length", "direction", "delta_queries"]
    write_csv(os.path.join(out_dir, "walk.csv"), columns, rows, config_echo(cfg))
    write_json(
        os.path.join(out_dir, "walk.json"),
        {
            "config": dict(config_echo(cfg)),
            "summary": {
                "t": wp.t,
                "mean_segment_length": mean_len,
                "closed_form": closed,
                "hit_up_frequency": float(np.mean(exits == 1)),
                "p_up": float(wp.p_up),
                "stream_segments": len(rows),
            },
        },
    )
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisyquerylab",
        description="Noisy-oracle query complexity laboratory",
    )
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="root seed (u64)")
    parser.add_argument("--trials", type=int, default=None, help="trials per cell")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--mode", choices=["rational", "real"], default=None)
    parser.add_argument("--jobs", type=int, default=None, help="worker processes")
    sub = parser.add_subparsers(dest="command", required=True)
    p_verify = sub.add_parser("verify", help="run a verification suite")
    p_verify.add_argument("suite", help=f"one of {sorted(SUITES)} or 'all'")
    sub.add_parser("counterexample", help="composed-vs-product query counts")
    sub.add_parser("channels", help="noisy/erasure conditional-entropy sweep")
    sub.add_parser("walk", help="bias-conversion walk statistics")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        for key in ("seed", "trials", "out", "mode", "jobs"):
            val = getattr(args, key)
            if val is not None:
                cfg["run"][key] = str(val)
        int(cfg["run"]["seed"])
        int(cfg["run"]["trials"])
        int(cfg["run"]["jobs"])
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    handlers = {
        "verify": cmd_verify,
        "counterexample": cmd_counterexample,
        "channels": cmd_channels,
        "walk": cmd_walk,
    }
    try:
        return handlers[args.command](args, cfg)
    except AssertionError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
