"""End-to-end acceptance criteria, one test per criterion.

Each test prints a single ``criterion N PASS|FAIL`` line; the lines are
repeated in the pytest terminal summary.
"""

import numpy as np
import pytest

from rb422 import analysis, channels, code, groups
from rb422.config import DEFAULT_GATE_NOISE, ExperimentConfig
from rb422.experiment import PLATFORM_RUNS, analyze, run_experiment, simulate
from rb422.protocol import estimate_survival
from rb422.qasm import (DEFAULT_TOPOLOGY, export_qasm, ingest_counts, load_manifest, parse_qasm,
                        simulate_exported)

pytestmark = pytest.mark.acceptance

BARE_RUNS = ("physical_standard", "physical_phased")


# --- shared runs --------------------------------------------------------------

@pytest.fixture(scope="session")
def gate_noise_run():
    """Default schedule, 36 sequences, 1024 shots, per-gate depolarizing noise, plain prep."""
    return run_experiment(ExperimentConfig(noise=DEFAULT_GATE_NOISE, seed=606))


@pytest.fixture(scope="session")
def r2():
    return groups.realizable_group()


# --- 1-4: groups and code ------------------------------------------------------

def test_criterion_01_group_orders(verdict, r2):
    sizes = (len(r2), len(groups.real_clifford_group()), len(groups.clifford_group()))
    verdict(1, "group orders", sizes == (576, 1152, 11520), f"|R2|, |C_R2|, |C2| = {sizes}")


def test_criterion_02_frame_potential(verdict, r2):
    p = groups.frame_potential(r2)
    verdict(2, "R(2) frame potential is 3", abs(p - 3) < 1e-9, f"P = {p:.12f}")


def test_criterion_03_word_lengths(verdict, r2):
    lr, lc = r2.mean_word_length(), groups.clifford_group().mean_word_length()
    verdict(3, "mean word lengths", 4 < lr < 5 and 7 < lc < 8, f"R2 {lr:.4f}, C2 {lc:.4f}")


def test_criterion_04_gate_table(verdict):
    checks = code.verify_gate_table()
    worst = max(c.max_deviation for c in checks)
    ok = len(checks) == 9 and all(c.passed for c in checks) and worst < 1e-10
    verdict(4, "code gate table", ok, f"{len(checks)} rows, worst deviation {worst:.1e}")


# --- 5: twirl oracle -----------------------------------------------------------

@pytest.mark.parametrize("p", [0.01, 0.05])
def test_criterion_05_oracle_equivalence(verdict, r2, p):
    noise = channels.depolarizing(p, 2)
    b0, c0 = channels.twirl_oracle(r2, noise)
    f0 = channels.channel_avg_fidelity(channels.twirled_channel(r2, noise))
    res = run_experiment(ExperimentConfig(run_types=BARE_RUNS, noise={"element_depolarizing": p}, seed=505))
    fit, est = res.fit(code.BARE), res.estimate(code.BARE)
    zb = abs(fit["params"]["b"] - b0) / fit["stderr"]["b"]
    zc = abs(fit["params"]["c"] - c0) / fit["stderr"]["c"]
    in_ci = est["ci_low"] <= 1 - f0 <= est["ci_high"]
    verdict(5, f"oracle equivalence p={p}", zb < 3 and zc < 3 and in_ci,
            f"b {fit['params']['b']:.5f} vs {b0:.5f} ({zb:.1f} SE), c {fit['params']['c']:.5f} vs {c0:.5f} "
            f"({zc:.1f} SE), 1-F {1 - f0:.5f} in CI [{est['ci_low']:.5f}, {est['ci_high']:.5f}]: {in_ci}")


# --- 6: post-selection ordering --------------------------------------------------

def test_criterion_06_postselection_ordering(verdict, gate_noise_run):
    bare = gate_noise_run.estimate(code.BARE)["infidelity"]
    post = gate_noise_run.estimate(code.LOGICAL)["infidelity"]
    naive = gate_noise_run.estimate(code.LOGICAL, "no_postselection")["infidelity"]
    ok = 0.04 <= bare <= 0.07 and post < naive < bare
    verdict(6, "logical < no-post-selection < bare", ok,
            f"bare {bare:.4f}, logical {post:.4f}, no post-selection {naive:.4f}")


# --- 7: crosstalk crossover ---------------------------------------------------------

ELEMENT_QUBIT_P = 0.0035  # product of four of these is a ~0.99-fidelity 4-qubit map
THETAS = (0.0, 0.05, 0.1)


@pytest.fixture(scope="session")
def crosstalk_sweep():
    out = []
    for theta in THETAS:
        cfg = ExperimentConfig(noise={"element_qubit_depolarizing": ELEMENT_QUBIT_P, "zz_theta": theta},
                               bootstrap_resamples=0, seed=707)
        res = run_experiment(cfg)
        out.append((theta, res.estimate(code.LOGICAL), res.estimate(code.BARE)))
    return out


def test_criterion_07_crosstalk_crossover(verdict, crosstalk_sweep, tmp_path_factory):
    from rb422.plotting import plot_fidelity_comparison

    map_f = channels.channel_avg_fidelity(
        channels.NoiseChannel([np.kron(np.kron(a, b), np.kron(c, d))
                               for a in channels.depolarizing(ELEMENT_QUBIT_P, 1).kraus
                               for b in channels.depolarizing(ELEMENT_QUBIT_P, 1).kraus
                               for c in channels.depolarizing(ELEMENT_QUBIT_P, 1).kraus
                               for d in channels.depolarizing(ELEMENT_QUBIT_P, 1).kraus]))
    crossed = [t for t, lg, br in crosstalk_sweep if lg["fidelity"] < br["fidelity"]]
    plot_fidelity_comparison(THETAS, [lg["fidelity"] for _, lg, _ in crosstalk_sweep],
                             [br["fidelity"] for _, _, br in crosstalk_sweep],
                             tmp_path_factory.mktemp("crosstalk") / "fidelity_vs_theta.png")
    detail = ", ".join(f"theta {t}: logical {lg['fidelity']:.4f} bare {br['fidelity']:.4f}"
                       for t, lg, br in crosstalk_sweep)
    verdict(7, "crosstalk crossover exists", abs(map_f - 0.99) < 0.002 and bool(crossed),
            f"4-qubit map F {map_f:.4f}; {detail}")


# --- 8: discard fraction --------------------------------------------------------------

def test_criterion_08_discard_fraction(verdict, gate_noise_run):
    s = gate_noise_run.series("logical_standard")
    d = s.discard
    err = np.sqrt(np.clip(d * (1 - d), 1e-12, None) / s.total)
    drops = d[:-1] - d[1:]
    monotone = bool(np.all(drops <= 3 * np.hypot(err[:-1], err[1:])))
    # approach to 1/2: fit d = 1/2 (1 - a r^m) and check the tail is within reach of the asymptote
    fit = analysis.fit_decay(estimate_survival(gate_noise_run.records["logical_standard"]))
    y = 0.5 - d
    pos = y > 0
    slope = np.polyfit(s.m[pos], np.log(y[pos]), 1)[0]
    ok = monotone and d[-1] <= 0.5 + 3 * err[-1] and d[-1] > 0.3 and slope < 0
    verdict(8, "discard fraction rises towards 1/2", ok,
            f"d(m=2) {d[0]:.3f}, d(m=92) {d[-1]:.3f}, log(1/2 - d) slope {slope:.4f}, "
            f"survival fit b {fit.params['b']:.4f}")


# --- 9: SPAM robustness ---------------------------------------------------------------

@pytest.mark.parametrize("platform", [code.BARE, code.LOGICAL])
def test_criterion_09_spam_robustness(verdict, gate_noise_run, platform):
    runs = PLATFORM_RUNS[platform]
    cfg = ExperimentConfig(run_types=runs, noise={**DEFAULT_GATE_NOISE, "state_prep_flip": 0.05}, seed=606)
    flipped = run_experiment(cfg).estimate(platform)
    base = gate_noise_run.estimate(platform)
    shift = abs(flipped["infidelity"] - base["infidelity"])
    width = base["ci_high"] - base["ci_low"]
    verdict(9, f"5% prep flips shift {platform} infidelity by less than the CI width", shift < width,
            f"{base['infidelity']:.5f} -> {flipped['infidelity']:.5f}, shift {shift:.5f}, CI width {width:.5f}")


# --- 10: determinism --------------------------------------------------------------------

def test_criterion_10_determinism(verdict, tmp_path):
    cfg = ExperimentConfig(noise=DEFAULT_GATE_NOISE, sequences_per_length=8, shots=256, seed=1010,
                           bootstrap_resamples=9999)
    a = run_experiment(cfg, tmp_path / "a.jsonl")
    run_experiment(cfg, tmp_path / "b.jsonl")
    same = (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    e = a.estimate(code.LOGICAL)
    samples = np.sort(analysis.bootstrap_infidelities(a.records["logical_standard"], a.records["logical_phased"],
                                                      9999, e["bootstrap_seed"]))
    ranks = (samples[249], samples[9749]) == (e["ci_low"], e["ci_high"])
    verdict(10, "identical results and bootstrap CIs", same and ranks,
            f"byte-identical {same}; CI = 250th/9,750th of 9,999: {ranks}")


# --- 11: QASM round trip ------------------------------------------------------------------

def test_criterion_11_qasm_round_trip(verdict, tmp_path):
    cfg = ExperimentConfig(noise={"element_depolarizing": 0.03, "measurement_flip": 0.01},
                           sequences_per_length=8, shots=1024, seed=1111, bootstrap_resamples=0)
    export_qasm(cfg, tmp_path)
    man = load_manifest(tmp_path)
    bad_edges = 0
    for e in man["sequences"]:
        prog = parse_qasm((tmp_path / e["file"]).read_text())
        bad_edges += sum(not DEFAULT_TOPOLOGY.allows(c, t) for c, t in prog.cx_edges())
    simulate_exported(tmp_path, cfg.model)
    ingested = ingest_counts(tmp_path)
    direct = simulate(cfg)
    worst = 0.0
    for rt, recs in direct.items():
        a = estimate_survival(recs)
        b = estimate_survival([r for r in ingested.records if r.run_type == rt])
        err = np.sqrt(a.binomial_error() ** 2 + b.binomial_error() ** 2 + 1e-30)
        worst = max(worst, float(np.max(np.abs(a.q - b.q) / np.maximum(err, 1e-12))))
    f_direct = analyze(direct, 0, cfg.seed)[1]
    f_qasm = analyze({rt: [r for r in ingested.records if r.run_type == rt] for rt in direct}, 0, cfg.seed)[1]
    fit_gap = max(abs(x["infidelity"] - y["infidelity"]) / max(x["stderr"], 1e-12)
                  for x, y in zip(f_direct, f_qasm))
    ok = bad_edges == 0 and worst <= 3 and fit_gap <= 3 and not ingested.shot_mismatches
    verdict(11, "QASM export round trip", ok,
            f"{len(man['sequences'])} programs, off-edge CNOTs {bad_edges}, worst survival gap {worst:.2f} sigma, "
            f"worst infidelity gap {fit_gap:.2f} SE")
