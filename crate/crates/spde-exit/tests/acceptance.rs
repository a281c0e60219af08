//! Release acceptance suite: every shipped claim checked end to end.
//!
//! Each test covers one acceptance criterion and prints exactly one verdict
//! line, `acceptance NN <name>: PASS|FAIL (details)`, before asserting. Run
//! the whole gate with:
//!
//! ```bash
//! cargo test -p spde-exit --test acceptance -- --nocapture
//! ```
//!
//! The criteria pin: deterministic consistency against quadrature, the
//! discrete noise covariance, exact moment identities of both population
//! models, domination of Monte Carlo estimates by every nontrivial bound,
//! rate-functional oracles, certificate consistency, the small-noise scaling
//! trend, and byte-level reproducibility of outputs.

use std::sync::Arc;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use spde_exit::config::ExperimentConfig;
use spde_exit::exit::{ExitMode, ExitSpec};
use spde_exit::field::{Field, MeasurePath, MeasureSlice};
use spde_exit::grid::{SpaceTimeGrid, WeightParams};
use spde_exit::heat::{heat_flow, heat_flow_refined};
use spde_exit::io::{csv_file_body_sha256, CsvTable};
use spde_exit::ldp::{
    ldp_scaling_scan, rate_measure, rate_spde, record_to_measure_path, skeleton_solve,
    ControlFunction,
};
use spde_exit::models::{ModelKind, ModelSpec};
use spde_exit::noise::{sample_slice, NoiseStream};
use spde_exit::runner::{run_experiment, Command};
use spde_exit::solver::{noise_increments, solve_path, Projection, SolverConfig};
use spde_exit::weighted::beta_sup;

/// Print the verdict line for criterion `id`, then enforce it.
fn verdict(id: &str, ok: bool, detail: String) {
    println!("acceptance {id}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "acceptance {id} failed: {detail}");
}

fn weights() -> WeightParams {
    WeightParams::new(1.0, 0.25, 0.5).unwrap()
}

/// Weighted sup distance between two fields on the same grid.
fn weighted_err(a: &Field, b: &Field) -> f64 {
    let diff: Vec<f64> =
        a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
    beta_sup(&diff, a.grid(), &weights()).unwrap()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[test]
fn acceptance_01_deterministic_consistency() {
    let start = Instant::now();
    // Noiseless solve against heat-kernel quadrature of the analytic
    // initial profile (the renormalized Gaussian ramp), then once more with
    // nx and nt both doubled. Doubling both doubles dt/dx^2, which is
    // exactly where the leading truncation coefficient dx^2 (1/24 - r/8)
    // halves in magnitude.
    let model = ModelSpec::sbm(1.0, 1.0).unwrap();
    let (lo, hi) = (normal_cdf(-8.0), normal_cdf(8.0));
    let profile = move |y: f64| (normal_cdf(y) - lo) / (hi - lo);
    let mut errs = Vec::new();
    for (nx, nt) in [(256usize, 1024usize), (512, 2048)] {
        let grid =
            Arc::new(SpaceTimeGrid::new(-8.0, 8.0, nx, -0.5, 4.0, 8, 1.0, nt).unwrap());
        let mut cfg = SolverConfig::new(0.0);
        cfg.stability_limit = 0.55;
        let record =
            solve_path(&model, &grid, &cfg, &NoiseStream::new(0, 0), None, None).unwrap();
        let got = record.final_field().unwrap();
        let oracle = heat_flow_refined(&grid, profile, 1.0, 32).unwrap();
        errs.push(weighted_err(&got, &oracle));
    }
    let ratio = errs[0] / errs[1];
    let elapsed = start.elapsed().as_secs_f64();
    let ok = errs[0] <= 2e-3 && (1.5..=2.5).contains(&ratio) && elapsed < 10.0;
    verdict(
        "01 deterministic-consistency",
        ok,
        format!(
            "weighted sup err {:.2e} (<= 2e-3), refinement ratio {ratio:.2} in [1.5, 2.5], {elapsed:.1} s < 10 s",
            errs[0]
        ),
    );
}

#[test]
fn acceptance_02_noise_covariance() {
    let start = Instant::now();
    // Freeze the field at its initial profile and accumulate the noise term
    // over many steps: the mean product at two nodes estimates
    // eps * int G(a, y_i, u_i) G(a, y_j, u_j) da * dt. Both auxiliary grids
    // place the level origin a = 0 on a cell knot (4.5/288 divides 0.5), so
    // the fractional-cell quadrature is exact for distinct levels; equal
    // levels carry only an O(da / u) top-cell deficit, well inside the
    // statistical band.
    let epsilon = 0.4;
    let steps = 20_000usize;
    let sbm_pairs = [(-1.0, 0.0), (0.0, 0.5), (0.5, 1.5), (-2.0, 2.0), (1.0, 1.0)];
    let fvp_pairs = [(-1.0, 0.0), (-0.5, 0.5), (0.0, 0.0), (0.0, 1.0), (0.5, 0.5)];
    let mut failures = Vec::new();
    for (name, model, a_min, a_max, na, pairs) in [
        ("branching", ModelSpec::sbm(1.0, 1.0).unwrap(), -0.5, 4.0, 288, sbm_pairs),
        ("resampling", ModelSpec::fvp(1.0).unwrap(), 0.0, 1.0, 256, fvp_pairs),
    ] {
        let grid = Arc::new(
            SpaceTimeGrid::new(-6.0, 6.0, 64, a_min, a_max, na, 2.0, steps).unwrap(),
        );
        let u = model.initial_field(grid.clone()).unwrap();
        let idx = |y: f64| ((y - grid.x_min) / grid.dx()).round() as usize;
        let stream = NoiseStream::new(77, 0);
        let mut prods = vec![Vec::with_capacity(steps); pairs.len()];
        for n in 0..steps {
            let slice = sample_slice(&stream, &grid, n as u64).unwrap();
            let sums = noise_increments(&model.kind, &grid, &slice, u.values());
            for (k, (yi, yj)) in pairs.iter().enumerate() {
                prods[k].push(epsilon * sums[idx(*yi)] * sums[idx(*yj)]);
            }
        }
        for (k, (yi, yj)) in pairs.iter().enumerate() {
            let (ui, uj) = (u.values()[idx(*yi)], u.values()[idx(*yj)]);
            let target = epsilon
                * model.kind.g_cross_integral(&grid, *yi, ui, uj).unwrap()
                * grid.dt();
            let mean = prods[k].iter().sum::<f64>() / steps as f64;
            let var = prods[k].iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (steps as f64 - 1.0);
            let se = (var / steps as f64).sqrt();
            if (mean - target).abs() > 4.0 * se {
                failures.push(format!(
                    "{name} ({yi},{yj}): {mean:.3e} vs {target:.3e} (4 SE = {:.1e})",
                    4.0 * se
                ));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 60.0;
    verdict(
        "02 noise-covariance",
        ok,
        format!(
            "10 node pairs within 4 SE over {steps} steps, both models, {elapsed:.1} s < 60 s{}{}",
            if failures.is_empty() { "" } else { "; " },
            failures.join("; ")
        ),
    );
}

#[test]
fn acceptance_03_branching_mass_moments() {
    let start = Instant::now();
    // The total mass of the branching model is a Feller branching diffusion:
    // a martingale with Var m_T = eps m0 T. The identities belong to the raw
    // scheme, so the monotone projection (which can only raise values) is
    // turned off here; flat ends keep the drift mass-conserving exactly.
    let (m0, epsilon, t_end) = (1.0, 0.5, 0.5);
    let replicas = 10_000u64;
    let model = ModelSpec::sbm(m0, 1.0).unwrap();
    let grid =
        Arc::new(SpaceTimeGrid::new(-6.0, 6.0, 64, -0.5, 4.0, 64, t_end, 256).unwrap());
    let mut cfg = SolverConfig::new(epsilon);
    cfg.projection = Projection::None;
    cfg.record_stride = grid.nt;
    let mut masses = Vec::with_capacity(replicas as usize);
    for replica in 0..replicas {
        let record =
            solve_path(&model, &grid, &cfg, &NoiseStream::new(311, replica), None, None)
                .unwrap();
        masses.push(record.final_field().unwrap().mass());
    }
    let n = masses.len() as f64;
    let mean = masses.iter().sum::<f64>() / n;
    let var = masses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se_mean = (var / n).sqrt();
    let target_var = epsilon * m0 * t_end;
    let mean_err = (mean - m0).abs();
    let var_rel = (var - target_var).abs() / target_var;
    let elapsed = start.elapsed().as_secs_f64();
    let ok = mean_err <= 3.0 * se_mean && var_rel <= 0.10 && elapsed < 300.0;
    verdict(
        "03 branching-mass-moments",
        ok,
        format!(
            "|mean - 1| = {mean_err:.4} <= 3 SE = {:.4}, var {var:.4} vs {target_var} (rel {var_rel:.3} <= 0.10), {elapsed:.0} s < 300 s",
            3.0 * se_mean
        ),
    );
}

#[test]
fn acceptance_04_resampling_semigroup_duality() {
    let start = Instant::now();
    // The resampling noise is mean zero, so the expected pairing of the
    // population measure with any test function evolves by the heat
    // semigroup alone: E <phi, mu_T> = <P_T phi, mu_0>. As in the moment
    // test, the raw scheme carries the identity, so no projection; pairings
    // are taken as signed Stieltjes sums so that a non-monotone excursion
    // needs no repair.
    let (epsilon, t_end) = (0.5, 0.5);
    let replicas = 10_000u64;
    let model = ModelSpec::fvp(1.0).unwrap();
    let grid =
        Arc::new(SpaceTimeGrid::new(-8.0, 8.0, 64, 0.0, 1.0, 64, t_end, 256).unwrap());
    let mut cfg = SolverConfig::new(epsilon);
    cfg.projection = Projection::None;
    cfg.record_stride = grid.nt;
    let phis: [(&str, fn(f64) -> f64); 3] = [
        ("cos(y/2)", |y| (0.5 * y).cos()),
        ("exp(-y^2/4)", |y| (-0.25 * y * y).exp()),
        ("1/(1+y^2)", |y| 1.0 / (1.0 + y * y)),
    ];
    // <phi, mu> for a cumulative field, as a signed sum over cell jumps.
    let pair = |field: &Field, phi: &dyn Fn(f64) -> f64| -> f64 {
        let v = field.values();
        (0..grid.nx)
            .map(|j| phi(0.5 * (grid.node(j) + grid.node(j + 1))) * (v[j + 1] - v[j]))
            .sum()
    };
    let mut samples = vec![Vec::with_capacity(replicas as usize); phis.len()];
    for replica in 0..replicas {
        let record =
            solve_path(&model, &grid, &cfg, &NoiseStream::new(1213, replica), None, None)
                .unwrap();
        let f = record.final_field().unwrap();
        for (k, (_, phi)) in phis.iter().enumerate() {
            samples[k].push(pair(&f, phi));
        }
    }
    let mu0 = model.initial_field(grid.clone()).unwrap();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (k, (name, phi)) in phis.iter().enumerate() {
        let flowed = heat_flow(&grid, phi, t_end).unwrap();
        let target = pair(&mu0, &|y| flowed.interpolate(y).unwrap());
        let n = samples[k].len() as f64;
        let mean = samples[k].iter().sum::<f64>() / n;
        let var =
            samples[k].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let gap = (mean - target).abs();
        details.push(format!("{name}: gap {gap:.2e} vs 3 SE {:.2e}", 3.0 * se));
        if gap > 3.0 * se {
            failures.push(name.to_string());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = failures.is_empty() && elapsed < 300.0;
    verdict(
        "04 resampling-semigroup-duality",
        ok,
        format!("{}; {elapsed:.0} s < 300 s", details.join(", ")),
    );
}

/// Experiment file shared by the sweep-based criteria; the caller appends
/// the sweep block and any overrides.
fn sweep_config(dir: &std::path::Path, tail: &str) -> ExperimentConfig {
    let text = format!(
        r#"
[model]
kind = "sbm"
mass = 1.0
sigma0 = 1.0

[grid]
x_min = -6.0
x_max = 6.0
nx = 48
a_min = -0.5
a_max = 3.5
na = 24
t_end = 0.5
nt = 128

[weights]
beta = 1.0
beta0 = 0.25
beta1 = 0.5

[solver]
epsilon = 0.005

[exit]
r = 2.0
delta0 = 0.3
t_deadline = 0.5
mode = "norm-exit"

[bounds]
k_max = 32
t_min = 0.4
rate_inf = 0.5

[run]
seed = 40
replicas = 2000
output_dir = "{}"
{tail}
"#,
        dir.display()
    );
    ExperimentConfig::parse(&text).unwrap()
}

#[test]
fn acceptance_05_exit_bound_dominates_monte_carlo() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    // Twenty (r, eps, T) points chosen inside the bound's informative
    // range; the Monte Carlo estimate must stay below J + 2 SE everywhere.
    let cfg = sweep_config(
        dir.path(),
        "[sweep]\nr = [2.0, 2.5, 3.0, 3.5, 4.0]\nepsilon = [0.005, 0.002]\nt = [0.45, 0.5]",
    );
    run_experiment(&cfg, &Command::Sweep).unwrap();
    let table = CsvTable::load(dir.path().join("sweep.csv")).unwrap();
    let col = |n: &str| table.column_index(n).unwrap();
    let (cj, cjt, cw) = (col("j_exit"), col("j_exit_trivial"), col("within_j"));
    let points = table.rows.len();
    let informative =
        table.rows.iter().filter(|r| r[cjt] == 0.0 && r[cj] < 1.0).count();
    let dominated = table.rows.iter().filter(|r| r[cw] == 1.0).count();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = points == 20 && informative == 20 && dominated == 20 && elapsed < 600.0;
    verdict(
        "05 exit-bound-domination",
        ok,
        format!(
            "{informative}/{points} points with J < 1, {dominated}/{points} with p_hat <= J + 2 SE, 2000 replicas each, {elapsed:.0} s < 600 s"
        ),
    );
}

#[test]
fn acceptance_06_attraction_sandwich() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    // Attraction scenario down the noise ladder: at each point the estimate
    // must sit inside [lower - 2 SE, upper + 4 SE] whenever the matching
    // side is informative, and the upper side must actually be informative
    // on at least half the ladder.
    let cfg = sweep_config(
        dir.path(),
        "[sweep]\nr = [2.5, 3.0]\nepsilon = [0.02, 0.01, 0.005, 0.002, 0.001]\nt = [0.5]",
    );
    run_experiment(&cfg, &Command::Sweep).unwrap();
    let table = CsvTable::load(dir.path().join("sweep.csv")).unwrap();
    let col = |n: &str| table.column_index(n).unwrap();
    let (clo, chi) = (col("within_sandwich_lower"), col("within_sandwich_upper"));
    let cut = col("thm2_upper_trivial");
    let points = table.rows.len();
    let lo_ok = table.rows.iter().filter(|r| r[clo] == 1.0).count();
    let hi_ok = table.rows.iter().filter(|r| r[chi] == 1.0).count();
    let informative_upper = table.rows.iter().filter(|r| r[cut] == 0.0).count();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = points == 10 && lo_ok == 10 && hi_ok == 10 && informative_upper >= 5;
    verdict(
        "06 attraction-sandwich",
        ok,
        format!(
            "{lo_ok}/{points} lower and {hi_ok}/{points} upper checks hold, {informative_upper} nontrivial upper bounds, {elapsed:.0} s"
        ),
    );
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / std::f64::consts::TAU.sqrt()
}

#[test]
fn acceptance_07_rate_functional_oracles() {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;

    // Free motion: the noiseless path must carry (almost) no rate.
    let grid =
        Arc::new(SpaceTimeGrid::new(-8.0, 8.0, 256, -0.5, 4.0, 8, 1.0, 512).unwrap());
    let model = ModelSpec::sbm(1.0, 1.0).unwrap();
    let mut cfg = SolverConfig::new(0.0);
    cfg.stability_limit = 0.55;
    let record =
        solve_path(&model, &grid, &cfg, &NoiseStream::new(0, 0), None, None).unwrap();
    let free = rate_measure(&record_to_measure_path(&record, 128).unwrap(), &ModelKind::Sbm)
        .unwrap();
    ok &= free.value <= 1e-3;
    parts.push(format!("heat-flow rate {:.1e} <= 1e-3", free.value));

    // Drifted Gaussian against the closed form (b^2/2) ln((s0^2+T)/s0^2)
    // for three speeds, with s0 = 1, T = 1.
    let fine =
        Arc::new(SpaceTimeGrid::new(-12.0, 12.0, 384, -0.5, 4.0, 8, 1.0, 256).unwrap());
    for b in [0.5, 1.0, 2.0] {
        let slices: Vec<MeasureSlice> = (0..=128)
            .map(|n| {
                let t = n as f64 / 128.0;
                let sigma = (1.0 + t).sqrt();
                let density: Vec<f64> = (0..fine.nx)
                    .map(|j| {
                        let y = 0.5 * (fine.node(j) + fine.node(j + 1));
                        normal_pdf((y - b * t) / sigma) / sigma
                    })
                    .collect();
                MeasureSlice::new(fine.clone(), t, density).unwrap()
            })
            .collect();
        let got =
            rate_measure(&MeasurePath::from_slices(&slices).unwrap(), &ModelKind::Sbm)
                .unwrap();
        let expect = 0.5 * b * b * 2f64.ln();
        let rel = (got.value - expect).abs() / expect;
        ok &= rel <= 0.02;
        parts.push(format!("b={b}: rel err {rel:.4} <= 0.02"));
    }

    // Quadratic scaling of the control price, exact to rounding.
    let h =
        ControlFunction::from_fn(grid.clone(), |t, a| (1.0 - t) * (a + 0.3).sin()).unwrap();
    let base = rate_spde(&h).value;
    let mut max_dev = 0.0f64;
    for k in [2.0, 3.0] {
        let scaled = rate_spde(&h.scale(k)).value;
        max_dev = max_dev.max((scaled / base - k * k).abs());
    }
    ok &= max_dev <= 1e-12;
    parts.push(format!("quadratic scaling dev {max_dev:.1e} <= 1e-12"));

    let elapsed = start.elapsed().as_secs_f64();
    verdict("07 rate-oracles", ok, format!("{}; {elapsed:.1} s", parts.join(", ")));
}

#[test]
fn acceptance_08_certificate_consistency() {
    let start = Instant::now();
    // Five random controls: integrating the skeleton equation and pricing
    // the resulting path with the measure rate must never exceed the
    // control price by more than 5% (the measure rate is an infimum over
    // controls, evaluated here on a matched grid).
    let grid =
        Arc::new(SpaceTimeGrid::new(-8.0, 8.0, 128, -0.5, 4.0, 48, 1.0, 1024).unwrap());
    let model = ModelSpec::sbm(1.0, 1.0).unwrap();
    let mut rng = StdRng::seed_from_u64(2718);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..5 {
        let amp = rng.gen_range(0.4..1.4);
        let freq = rng.gen_range(0.5..2.0);
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let (a_lo, a_hi) = {
            let lo = rng.gen_range(0.0..0.3);
            (lo, lo + rng.gen_range(0.15..0.3))
        };
        let h = ControlFunction::from_fn(grid.clone(), |t, a| {
            if (a_lo..a_hi).contains(&a) {
                amp * (freq * std::f64::consts::TAU * t + phase).sin()
            } else {
                0.0
            }
        })
        .unwrap();
        let price = rate_spde(&h).value;
        let record = skeleton_solve(&model, &h, &grid).unwrap();
        let measured =
            rate_measure(&record_to_measure_path(&record, 64).unwrap(), &ModelKind::Sbm)
                .unwrap();
        let ratio = measured.value / price;
        worst = worst.max(ratio);
        ok &= measured.value <= price * 1.05;
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "08 certificate-consistency",
        ok,
        format!(
            "5 random controls, worst measured/price ratio {worst:.3} <= 1.05, {elapsed:.1} s"
        ),
    );
}

#[test]
fn acceptance_09_scaling_trend() {
    let start = Instant::now();
    // Down the noise ladder the diagnostic |eps ln p| must behave like a
    // converging sequence: monotone up to confidence-interval slack, or
    // with non-growing successive differences.
    let grid =
        Arc::new(SpaceTimeGrid::new(-6.0, 6.0, 64, -0.5, 4.0, 32, 0.5, 512).unwrap());
    let w = weights();
    let model = ModelSpec::sbm(1.0, 1.0).unwrap();
    let spec = ExitSpec { r: 0.8, delta0: 0.2, t_deadline: 0.5, mode: ExitMode::NormExit };
    let rows = ldp_scaling_scan(
        &spec,
        &model,
        &grid,
        &w,
        &SolverConfig::new(1.0),
        &[0.8, 0.4, 0.2, 0.1],
        2000,
        99,
    )
    .unwrap();
    let in_range = rows.iter().all(|r| r.p_hat > 1e-3 && r.p_hat < 0.9);
    // |eps ln p| intervals: ci.0 maps to the larger magnitude, ci.1 to the
    // smaller. A trend violation must be statistically certain: the whole
    // interval at the next rung above the whole interval at this one.
    let vals: Vec<f64> = rows.iter().map(|r| r.eps_log_p.unwrap().abs()).collect();
    let his: Vec<f64> = rows.iter().map(|r| r.ci.0.abs()).collect();
    let los: Vec<f64> = rows.iter().map(|r| r.ci.1.abs()).collect();
    let monotone_within_ci = (1..vals.len()).all(|k| los[k] <= his[k - 1]);
    let diffs: Vec<f64> = vals.windows(2).map(|p| (p[1] - p[0]).abs()).collect();
    let shrinking = diffs.windows(2).all(|d| d[1] <= d[0] + 0.02);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = in_range && (monotone_within_ci || shrinking) && elapsed < 900.0;
    verdict(
        "09 scaling-trend",
        ok,
        format!(
            "p_hat in (1e-3, 0.9) at all rungs: {in_range}; |eps ln p| = {:?}, monotone within CI: {monotone_within_ci}, shrinking diffs: {shrinking}; {elapsed:.0} s < 900 s",
            vals.iter().map(|v| (v * 1e3).round() / 1e3).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn acceptance_10_reproducibility() {
    let start = Instant::now();
    // Identical config and seed must reproduce every CSV body byte for byte
    // under the same manifest id, across both a Monte Carlo command and a
    // pure bound evaluation.
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(dir.path(), "");
    let mut ids = Vec::new();
    let mut hashes: Vec<(String, String)> = Vec::new();
    for _ in 0..2 {
        let exit = run_experiment(&cfg, &Command::ExitProb).unwrap();
        let bounds = run_experiment(&cfg, &Command::Bounds).unwrap();
        ids.push((exit.manifest.manifest_id(), bounds.manifest.manifest_id()));
        hashes.push((
            csv_file_body_sha256(dir.path().join("exit_prob.csv")).unwrap(),
            csv_file_body_sha256(dir.path().join("bounds.csv")).unwrap(),
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = ids[0] == ids[1] && hashes[0] == hashes[1];
    verdict(
        "10 reproducibility",
        ok,
        format!(
            "manifest ids stable: {}, CSV body hashes stable: {}; {elapsed:.0} s",
            ids[0] == ids[1],
            hashes[0] == hashes[1]
        ),
    );
}
