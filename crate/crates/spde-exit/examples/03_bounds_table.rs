//! Rigorous exit-probability bounds with a constructive constants ledger.
//!
//! Every bound in this crate is a closed-form expression in a handful of
//! named constants. The ledger is built constructively from the problem
//! data (initial profile growth, kernel integrals, a pilot moment fit) and
//! each entry carries its provenance, so a reported bound can always be
//! traced back to the numbers it was computed from.
//!
//! # Running
//! ```bash
//! cargo run --release -p spde-exit --example 03_bounds_table
//! ```

use std::sync::Arc;

use spde_exit::bounds::{
    eval_j, eval_n2, mean_size_rhs, optimize_k, thm1_lower, thm1_mean_bound, thm2_bounds,
    thm3_exit_bound, upperbound_survival, BoundConstants, ConstantOverrides, RateValue,
};
use spde_exit::grid::{SpaceTimeGrid, WeightParams};
use spde_exit::models::ModelSpec;

fn main() -> spde_exit::Result<()> {
    println!("=== Exit bounds and the constants ledger ===\n");

    let grid = Arc::new(SpaceTimeGrid::new(-8.0, 8.0, 128, -0.5, 4.0, 64, 1.0, 2048)?);
    let w = WeightParams::new(1.0, 0.25, 0.5)?;
    let model = ModelSpec::sbm(1.0, 1.0)?;
    let epsilon = 0.01;
    let t_horizon = 1.0;

    println!("1. Building the constants ledger (moment fit uses a pilot run):");
    // Pushing the sup window away from t = 0 keeps the kernel constants
    // finite; the bound then covers exits after t_min only.
    let ov = ConstantOverrides { t_min: Some(0.25), ..ConstantOverrides::default() };
    let c = BoundConstants::constructive(&model, &grid, &w, t_horizon, epsilon, 33, &ov)?;
    for (name, value) in c.ledger() {
        let src = c.provenance.get(&name).map(String::as_str).unwrap_or("?");
        println!("   {name:10} = {value:<12.6} [{src}]");
    }

    println!("\n2. Norm-exit bound J(r, eps, T), optimized over the moment exponent k:");
    for r in [4.0, 6.0, 8.0] {
        let (k, j) = optimize_k(r, epsilon, t_horizon, &c, 64)?;
        let tag = if j.trivial { " (trivial)" } else { "" };
        println!("   r = {r}: J = {:.6} at k = {k}{tag}", j.value);
    }
    let fixed = eval_j(6.0, epsilon, t_horizon, &c.with_k(8))?;
    println!("   fixed k = 8, r = 6: J = {:.6} (optimization can only improve this)", fixed.value);

    println!("\n3. Large-deviation bounds from a rate-function value:");
    // A rate infimum can come from the candidate search (example 07) or be
    // supplied directly; here we plug in a plausible value by hand.
    let rate = RateValue::user(0.8)?;
    let lower = thm1_lower(&rate, epsilon, c.delta);
    let mean = thm1_mean_bound(&rate, epsilon, c.delta)?;
    println!("   exit-probability lower bound: {lower:.6e}");
    println!("   mean attraction-visits upper bound: {mean:.6}");

    println!("\n4. Two-sided sandwich in the attraction scenario:");
    // Shrinking noise drives the upper side toward the pure rate term; the
    // lower side stays trivial while delta0 sits below the admissibility
    // cutoff of the small-ball bound, and the trivial flags say so.
    for eps in [0.01, 0.002, 0.0005] {
        let s = thm2_bounds(8.0, 0.5, eps, t_horizon, &rate, &c)?;
        println!(
            "   eps = {eps}: {:.4} <= P <= {:.4}  (lower trivial: {}, upper trivial: {}), mean visits <= {:.4}",
            s.lower, s.upper, s.lower_trivial, s.upper_trivial, s.mean_upper
        );
    }

    println!("\n5. Population-threshold bound:");
    let n2 = eval_n2(2.0, epsilon, t_horizon, &w, &c)?;
    let hit = thm3_exit_bound(2.0, epsilon, t_horizon, &w, &c)?;
    if n2.vacuous {
        println!("   constructive ledger: N2 vacuous (inner factor {:.4}), bound {} (trivial: {})", n2.value, hit.value, hit.trivial);
    } else {
        println!("   constructive ledger: N2 = {:.6}, bound {:.6}", n2.value, hit.value);
    }
    // The constructive annulus constants are far too conservative for an
    // informative threshold; with user-supplied values (recorded as such in
    // the provenance) the same formulas produce a working bound.
    let assumed = ConstantOverrides {
        t_min: Some(0.25),
        k5: Some(0.0),
        k6: Some(0.01),
        k9: Some(1.0),
        c1: Some(0.05),
        // Reuse the pilot moment fit from above instead of rerunning it.
        m: Some(c.m),
        ..ConstantOverrides::default()
    };
    let ca = BoundConstants::constructive(&model, &grid, &w, t_horizon, epsilon, 33, &assumed)?;
    let n2a = eval_n2(2.0, 1e-4, t_horizon, &w, &ca)?;
    let hita = thm3_exit_bound(2.0, 1e-4, t_horizon, &w, &ca)?;
    println!(
        "   assumed annulus constants, eps = 1e-4: N2 = {:.4} (vacuous: {}), bound {:.4} (trivial: {})",
        n2a.value, n2a.vacuous, hita.value, hita.trivial
    );
    println!("   k6 provenance now: {}", ca.provenance["k6"]);

    println!("\n6. Mean-size display and long-run survival:");
    for t in [1.0, 2.0, 4.0] {
        let ms = mean_size_rhs(t, epsilon, &w, &c)?;
        println!("   t = {t}: mean-size right side = {:.4} (vacuous: {})", ms.value, ms.vacuous);
    }
    let surv = upperbound_survival(4.0, &rate, epsilon, c.delta)?;
    println!("   survival probability after T = 4: <= {surv:.6e}");

    Ok(())
}
