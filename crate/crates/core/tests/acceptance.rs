//! Acceptance criteria A1–A8. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::f64::consts::{FRAC_PI_4, TAU};
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use common::{first_error, golden, negative_files, positive_files};
use qiup_core::circuit::{compile, fig1_plan, BoundPlan, ExecOptions, Fig1Params};
use qiup_core::estimation::{closed_form_scan, fit, simulate_measurement, MeasuredScan};
use qiup_core::observables::{
    conditional_state, counts, fringe_scan, uniform_phase_grid, visibility, CountResult, Sinusoid,
};
use qiup_core::reference::{nh_closed, nv_closed, nv_extrema_closed, visibility_closed};
use qiup_core::state::{Band, Mode, ModePair, PathId, Polarization, SourceId, SourceTag};

fn path(s: &str) -> PathId {
    PathId::new(s).unwrap()
}

fn betas() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

fn gammas() -> Vec<f64> {
    (0..8).map(|k| k as f64 * FRAC_PI_4).collect()
}

fn bound(beta1: f64, gamma: f64, phi: f64) -> BoundPlan {
    fig1_plan()
        .bind(&Fig1Params::closed_form_regime(beta1, gamma, phi).bindings())
        .unwrap()
}

fn at_o_prime(plan: &BoundPlan, opts: &ExecOptions) -> CountResult {
    counts(&plan.execute(opts).unwrap(), &path("o'"), Band::Signal)
}

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn a1() -> Outcome {
    let start = Instant::now();
    let opts = ExecOptions::default();
    let phis = uniform_phase_grid(64);
    let (mut dh, mut dv) = (0.0f64, 0.0f64);
    let mut worst = (0.0, 0.0, 0.0);
    for &b in &betas() {
        for &g in &gammas() {
            for &p in &phis {
                let c = at_o_prime(&bound(b, g, p), &opts);
                dh = dh.max((c.n_h - nh_closed(b, g, p).unwrap()).abs());
                let d = (c.n_v - nv_closed(b, g, p).unwrap()).abs();
                if d > dv {
                    dv = d;
                    worst = (b, g, p);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: dh < 1e-9 && dv < 1e-9,
        detail: format!(
            "oracle equivalence over 11x8x64: max|dN_H|={dh:.3e} max|dN_V|={dv:.3e} \
             (tol 1e-9; worst N_V at beta1={:.1} gamma={:.3} phi={:.3}; {secs:.2}s)",
            worst.0, worst.1, worst.2
        ),
    }
}

fn a2() -> Outcome {
    let grid = uniform_phase_grid(256);
    let plan = fig1_plan();
    let opts = ExecOptions::default();
    let (mut dgrid, mut drefined, mut danalytic) = (0.0f64, 0.0f64, 0.0f64);
    for &b in &[0.0, 0.25, 0.5, 0.75, 1.0] {
        let want = 0.8 * b;
        let bind = Fig1Params::closed_form_regime(b, 0.0, 0.0).bindings();
        let scan = fringe_scan(&plan, &bind, "phi", &grid, &opts).unwrap();
        let v = scan.vertical_visibility().unwrap();
        dgrid = dgrid.max((v.value - want).abs());
        let s = Sinusoid::fit(&grid, &scan.n_v()).unwrap();
        drefined = drefined.max((s.visibility() - want).abs());
        let (hi, lo) = nv_extrema_closed(b, 0.0).unwrap();
        danalytic = danalytic.max(((hi - lo) / (hi + lo) - want).abs());
        danalytic = danalytic.max((visibility_closed(b).unwrap() - want).abs());
    }
    Outcome {
        pass: dgrid < 1e-3 && drefined < 1e-9 && danalytic < 1e-9,
        detail: format!(
            "visibility 4*beta1/5: 256-point grid max dev {dgrid:.3e} (tol 1e-3), \
             sinusoid-refined {drefined:.3e}, closed-form extrema {danalytic:.3e} (tol 1e-9)"
        ),
    }
}

fn a3() -> Outcome {
    // α₁ = α₂ = 1 means β₁ = β₂ = 0; θ = 45°.
    let mut b = Fig1Params {
        beta1: 0.0,
        gamma: 0.0,
        phi: 0.0,
        theta: FRAC_PI_4,
        beta2: 0.0,
    }
    .bindings();
    b.insert("alpha1".into(), 1.0);
    b.insert("alpha2".into(), 1.0);
    let state = fig1_plan()
        .bind(&b)
        .unwrap()
        .execute(&ExecOptions::default())
        .unwrap();
    let cond = conditional_state(&state, &path("o'"), Band::Signal);
    let t1 = SourceTag::Tagged(SourceId::new(1).unwrap());
    let pair = ModePair::new(
        Mode::new(path("o'"), Band::Signal, Polarization::H, t1),
        Mode::new(path("f'"), Band::Idler, Polarization::V, t1),
    )
    .unwrap();
    let a = cond.amplitude(&pair);
    let want = 1.0 / (2.0 * 2f64.sqrt());
    let pass = (a.norm() - want).abs() < 1e-12 && a.im.abs() < 1e-12 && a.re > 0.0;
    Outcome {
        pass,
        detail: format!(
            "amplitude of (H_S1 @ o', V_I1 @ f') = {:.15}{:+.3e}i, expected +{want:.15}",
            a.re, a.im
        ),
    }
}

fn a4() -> Outcome {
    let phis = uniform_phase_grid(64);
    let mut dmax = 0.0f64;
    for &chi in &[0.1, 1.0, 2.5] {
        let shifted = ExecOptions {
            h_phase: vec![(path("a"), Band::Idler, chi)],
            ..ExecOptions::default()
        };
        for &b in &betas() {
            for &g in &gammas() {
                for &p in &phis {
                    let plan = bound(b, g, p);
                    let c0 = at_o_prime(&plan, &ExecOptions::default());
                    let c1 = at_o_prime(&plan, &shifted);
                    dmax = dmax
                        .max((c0.n_h - c1.n_h).abs())
                        .max((c0.n_v - c1.n_v).abs());
                }
            }
        }
    }
    Outcome {
        pass: dmax <= 1e-12,
        detail: format!("alpha1 -> alpha1*e^(i chi), chi in {{0.1,1,2.5}}: max count change {dmax:.3e} (tol 1e-12)"),
    }
}

fn a5() -> Outcome {
    let phis = uniform_phase_grid(64);
    let opts = ExecOptions {
        merge: false,
        ..ExecOptions::default()
    };
    let plan = fig1_plan();
    let mut vmax = 0.0f64;
    for &b in &betas() {
        for &g in &gammas() {
            let mut bind = Fig1Params::closed_form_regime(b, g, 0.0).bindings();
            bind.remove("phi");
            let scan = fringe_scan(&plan, &bind, "phi", &phis, &opts).unwrap();
            vmax = vmax.max(visibility(&phis, &scan.n_v()).unwrap().value);
        }
    }
    Outcome {
        pass: vmax < 1e-12,
        detail: format!("merging disabled: max vertical visibility {vmax:.3e} (tol 1e-12)"),
    }
}

fn a6() -> Outcome {
    let (mut dnorm, mut dcomplete) = (0.0f64, 0.0f64);
    let mut steps = 0;
    for &b in &betas() {
        for &g in &gammas() {
            for &p in &uniform_phase_grid(8) {
                let trace = bound(b, g, p)
                    .execute_traced(&ExecOptions::default())
                    .unwrap();
                steps = trace.len();
                for (_, s) in &trace {
                    dnorm = dnorm.max((s.norm_sq() - 2.0).abs());
                }
                let last = &trace.last().unwrap().1;
                let total: f64 = last
                    .paths(Band::Signal)
                    .iter()
                    .map(|q| {
                        let c = counts(last, q, Band::Signal);
                        c.n_h + c.n_v
                    })
                    .sum();
                dcomplete = dcomplete.max((total - 2.0).abs());
            }
        }
    }
    Outcome {
        pass: dnorm < 1e-12 && dcomplete < 1e-12,
        detail: format!(
            "norm^2 = 2 across {steps} pipeline states: max dev {dnorm:.3e}; \
             signal completeness max dev {dcomplete:.3e} (tol 1e-12)"
        ),
    }
}

fn circular(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn a7() -> Outcome {
    let start = Instant::now();
    let grid = uniform_phase_grid(64);
    let (mut db, mut dg, mut rss) = (0.0f64, 0.0f64, 0.0f64);
    for &b in &[0.1, 0.325, 0.55, 0.775, 1.0] {
        for k in 0..5 {
            let g = 0.3 + k as f64 * TAU / 5.0;
            let scan = closed_form_scan(b, g, &grid).unwrap();
            let r = fit(&MeasuredScan::from(&scan)).unwrap();
            db = db.max((r.beta1_hat - b).abs());
            dg = dg.max(circular(r.gamma_hat, g));
            rss = rss.max(r.residual_sum_sq);
        }
    }
    let scan = closed_form_scan(0.8, 0.5, &grid).unwrap();
    let hits = (0..20u64)
        .filter(|&seed| {
            let noisy = simulate_measurement(&scan, 100_000, seed).unwrap();
            let r = fit(&MeasuredScan::from(&noisy)).unwrap();
            (r.beta1_hat - 0.8).abs() < 0.02
        })
        .count();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: db < 1e-6 && dg < 1e-6 && rss < 1e-18 && hits >= 18 && secs < 30.0,
        detail: format!(
            "noiseless 5x5: max|d beta1|={db:.3e} max|d gamma|={dg:.3e} max rss={rss:.3e}; \
             Poisson 1e5 shots: {hits}/20 seeds within 0.02; {secs:.2}s"
        ),
    }
}

fn a8() -> Outcome {
    let mut bad = Vec::new();
    let pos = positive_files();
    let neg = negative_files();
    for f in &pos {
        let text = fs::read_to_string(f).unwrap();
        if compile(&text).is_err() {
            bad.push(f.display().to_string());
        }
    }
    for f in &neg {
        let text = fs::read_to_string(f).unwrap();
        let want = golden(&text);
        if first_error(&text).as_ref() != Some(&want) {
            bad.push(f.display().to_string());
        }
    }
    Outcome {
        pass: bad.is_empty() && !pos.is_empty() && !neg.is_empty(),
        detail: format!(
            "{} shipped files, {} negative goldens; mismatches: [{}]",
            pos.len(),
            neg.len(),
            bad.join(", ")
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{name} {} {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
