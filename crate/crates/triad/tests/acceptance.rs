//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities (visible under `--nocapture`).
//!
//! Statistical criteria run on fixed seeds, so every run of this suite is
//! deterministic.

use std::time::Instant;

use triad::analysis::{
    chi_square_test, distribution_error_from_ratios, fit_power_law, mean_and_variance,
    merge_results, trajectory_summary,
};
use triad::engine::{choose_interaction, run_replications, CheckpointSchedule, RunConfig};
use triad::oracle::{enumerate_step, participation_formula, participation_probability,
    reference_states};
use triad::theory::{xw_closed_form, xw_recursion, Params};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;

fn params(p: f64, r: f64, q: f64) -> Params {
    Params::new(p, r, q).unwrap()
}

/// Criterion 1 — the participation identity `alpha w / n + beta p / V` holds
/// exactly (rational arithmetic, zero tolerance) on 6 small states x 3
/// parameter sets, for every vertex.
#[test]
fn criterion_1_exact_participation_identity() {
    let start = Instant::now();
    let param_sets = [
        params(1.0, 1.0, 0.0),
        params(0.5, 0.5, 0.5),
        params(0.3, 0.7, 0.2),
    ];
    let states = reference_states();
    assert!(states.len() >= 5);
    let mut checked = 0;
    for state in &states {
        for p in &param_sets {
            for vertex in 0..state.vertex_count() as u32 {
                let enumerated = participation_probability(state, p, vertex).unwrap();
                let formula = participation_formula(state, p, vertex).unwrap();
                assert_eq!(
                    enumerated, formula,
                    "identity failed: state n = {}, vertex {vertex}",
                    state.steps()
                );
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}, budget 1 s");
    println!(
        "[ACCEPT 1] PASS exact participation identity: {checked} vertex checks \
         across {} states x {} parameter sets, zero error, {elapsed:?}",
        states.len(),
        param_sets.len()
    );
}

/// Criterion 2 — chi-square goodness of fit of 1e5 engine draws against the
/// exact enumerated distribution, significance 1e-3, on 3 states x 2
/// parameter sets.
#[test]
fn criterion_2_engine_matches_oracle() {
    let start = Instant::now();
    let param_sets = [params(0.5, 0.5, 0.5), params(0.3, 0.7, 0.2)];
    let states = reference_states();
    let mut combos = 0;
    for state in &states[..3] {
        for (pi, p) in param_sets.iter().enumerate() {
            let exact = enumerate_step(state, p).unwrap();
            let outcomes = exact.probabilities_f64();
            let index: BTreeMap<_, usize> = outcomes
                .iter()
                .enumerate()
                .map(|(i, (c, _))| (*c, i))
                .collect();
            let mut observed = vec![0u64; outcomes.len()];
            let mut rng =
                ChaCha12Rng::seed_from_u64(1000 + 7 * state.steps() + pi as u64);
            let draws = 100_000;
            for _ in 0..draws {
                let choice = choose_interaction(state, p, &mut rng);
                observed[index[&choice]] += 1;
            }
            let probs: Vec<f64> = outcomes.iter().map(|(_, p)| *p).collect();
            let test = chi_square_test(&observed, &probs).unwrap();
            assert!(
                test.p_value >= 1e-3,
                "chi-square failed on state n = {}, params #{pi}: stat = {}, df = {}, p = {}",
                state.steps(),
                test.statistic,
                test.df,
                test.p_value
            );
            combos += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}, budget 10 s");
    println!(
        "[ACCEPT 2] PASS engine-oracle chi-square: {combos} state x parameter \
         combinations, 1e5 draws each, all p-values >= 1e-3, {elapsed:?}"
    );
}

/// Criterion 3 — after 1e6 steps the weight totals are exact and the full
/// structural audit passes at every checkpoint.
#[test]
fn criterion_3_structural_invariants_at_scale() {
    let start = Instant::now();
    let config = RunConfig::new(params(0.5, 0.5, 0.5), 1_000_000, 20_250_809);
    // run_simulation runs the full audit at every checkpoint and fails the
    // run on any violation
    let (result, state) = triad::engine::run_simulation_with_state(&config).unwrap();
    assert_eq!(state.total_triangle_weight(), 1_000_001);
    assert_eq!(state.total_edge_weight(), 3_000_003);
    assert!(state.verify_invariants().is_empty());
    assert_eq!(result.checkpoints.len(), config.checkpoints.points(1_000_000).len());
    let elapsed = start.elapsed();
    println!(
        "[ACCEPT 3] PASS structural invariants at n = 1e6: triangle total \
         1000001, edge total 3000003, {} checkpoint audits clean, {elapsed:?} \
         (target < 5 s)",
        result.checkpoints.len()
    );
}

/// Criterion 4 — Theorem-1 check: the replication mean of `X[n,w]/V_n` at
/// n = 1e6 matches `x_w` within 5% relative error for w = 1..=5,
/// for (p, r, q) = (1, 1, 0).
#[test]
fn criterion_4_weight_distribution_matches_theory() {
    let start = Instant::now();
    let p = params(1.0, 1.0, 0.0);
    let template = RunConfig::new(p, 1_000_000, 41);
    let results = run_replications(&template, 16, Some(2)).unwrap();
    let aggregate = merge_results(&results).unwrap();
    let theory = xw_recursion(&p.coefficients(), 16);
    let report =
        distribution_error_from_ratios(&aggregate.per_w_ratio_mean, &theory, 5).unwrap();
    for e in &report.per_w {
        assert!(
            e.rel_error <= 0.05,
            "w = {}: empirical {}, theory {}, rel error {}",
            e.w,
            e.empirical,
            e.theory,
            e.rel_error
        );
    }
    let elapsed = start.elapsed();
    println!(
        "[ACCEPT 4] PASS weight distribution at n = 1e6, 16 replications: \
         max rel error {:.4} over w = 1..=5 (tolerance 0.05), {elapsed:?}",
        report.max_rel_error()
    );
}

/// Criterion 5 — theoretical tail: log-log slope within 1% of -(1 + 1/alpha),
/// recursion vs closed form to 1e-10 up to w = 1e4, telescoping to 1e-12 at
/// w = 1e5.
#[test]
fn criterion_5_tail_exponent_and_closed_form() {
    let start = Instant::now();
    // sets chosen inside the asymptotic regime: beta/alpha small enough that
    // the w^-(1+1/alpha) law is visible by w = 1e2..1e4
    let sets = [
        params(1.0, 1.0, 0.0),
        params(0.5, 0.5, 0.5),
        params(0.5, 1.0, 0.5),
        params(0.9, 0.2, 0.8),
    ];
    for p in &sets {
        let coeffs = p.coefficients();
        let theory = xw_recursion(&coeffs, 100_000);

        let fit = fit_power_law(&theory.points(), 100, 10_000).unwrap();
        let target = -(1.0 + 1.0 / coeffs.alpha);
        assert!(
            (fit.slope / target - 1.0).abs() <= 0.01,
            "slope {} vs {target} for alpha = {}",
            fit.slope,
            coeffs.alpha
        );

        for w in 1..=10_000u64 {
            let closed = xw_closed_form(&coeffs, w);
            let recursion = theory.x(w as usize);
            assert!(
                (closed / recursion - 1.0).abs() <= 1e-10,
                "closed form mismatch at w = {w}: {closed} vs {recursion}"
            );
        }

        let head: f64 = theory.xs().iter().sum();
        assert!(
            ((1.0 - head) - theory.y(100_000)).abs() <= 1e-12,
            "telescoping: 1 - sum = {}, y = {}",
            1.0 - head,
            theory.y(100_000)
        );
    }
    let elapsed = start.elapsed();
    println!(
        "[ACCEPT 5] PASS tail asymptotics on {} parameter sets: slopes within \
         1%, closed form within 1e-10 up to w = 1e4, telescoping within 1e-12 \
         at w = 1e5, {elapsed:?}",
        sets.len()
    );
}

/// Criterion 6 — vertex growth: mean `V_n/n` over 16 replications at
/// n = 1e5 within 0.01 of p, for p in {0.3, 0.5, 1.0}.
#[test]
fn criterion_6_vertex_count_ratio() {
    let start = Instant::now();
    let sets = [
        params(0.3, 0.5, 0.5),
        params(0.5, 0.5, 0.5),
        params(1.0, 1.0, 0.0),
    ];
    for p in &sets {
        let template = RunConfig::new(*p, 100_000, 61);
        let results = run_replications(&template, 16, Some(2)).unwrap();
        let aggregate = merge_results(&results).unwrap();
        assert!(
            (aggregate.v_ratio_mean - p.p()).abs() <= 0.01,
            "mean V_n/n = {} vs p = {}",
            aggregate.v_ratio_mean,
            p.p()
        );
        println!(
            "[ACCEPT 6] p = {}: mean V_n/n = {:.5} (tolerance 0.01)",
            p.p(),
            aggregate.v_ratio_mean
        );
    }
    println!(
        "[ACCEPT 6] PASS vertex count ratio for p in {{0.3, 0.5, 1.0}}, {:?}",
        start.elapsed()
    );
}

/// Criterion 7 — fixed-vertex diagnostics for (1, 1, 0), n = 1e5, 32
/// replications, vertex 0: positive scaled weights, stable `W/n^alpha`
/// between n = 1e4 and n = 1e5, and martingale increments centered on zero.
#[test]
fn criterion_7_fixed_vertex_scaling_and_martingale() {
    let start = Instant::now();
    let p = params(1.0, 1.0, 0.0);
    let coeffs = p.coefficients();
    let template = RunConfig {
        tracked_vertices: vec![0],
        checkpoints: CheckpointSchedule::powers(10).unwrap(),
        ..RunConfig::new(p, 100_000, 77)
    };
    let results = run_replications(&template, 32, Some(2)).unwrap();

    let mut stability_deviation: Vec<f64> = Vec::new();
    let mut pooled_increments: Vec<f64> = Vec::new();
    for result in &results {
        let report = trajectory_summary(result, &coeffs).unwrap();
        let v = &report.vertices[0];
        assert!(v.zeta > 0.0, "zeta estimate must be strictly positive");
        let (_, final_scaled) = *v.scaled.last().unwrap();
        assert!(final_scaled > 0.0);
        stability_deviation.push((v.stability_ratio - 1.0).abs());
        pooled_increments.extend(&v.increments);
        for &(_, s) in &v.supermartingale {
            assert!(s.is_finite() && s > 0.0);
        }
    }

    stability_deviation.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = stability_deviation[stability_deviation.len() / 2];
    assert!(
        median <= 0.15,
        "median |stability - 1| = {median} exceeds 0.15"
    );

    let (mean, variance) = mean_and_variance(&pooled_increments);
    let se = (variance / pooled_increments.len() as f64).sqrt();
    assert!(
        mean.abs() <= 4.0 * se,
        "martingale increment mean {mean} outside 4 x SE = {}",
        4.0 * se
    );
    println!(
        "[ACCEPT 7] PASS fixed-vertex diagnostics over 32 replications: all \
         W/n^alpha > 0, median |stability - 1| = {median:.4} (tolerance 0.15), \
         mean Z increment {mean:.5} within 4 x SE = {:.5}, {:?}",
        4.0 * se,
        start.elapsed()
    );
}
