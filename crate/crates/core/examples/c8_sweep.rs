//! Temporary sweep: comparative protocol probe (equal inner-call budgets).

use std::time::Instant;

use hippa_core::{
    boosted_hippa_run, generate_instance, hippa_run, phi_oracle, psi_oracle, run_subgradient,
    EnvelopeParams, ErrorSchedule, GaussianSampler, InnerBudgetSchedule, ModelConfig,
    ObjectiveOracle, Point, SgdssInner, SpectralConfig, StepRule, StoppingRule,
};

fn main() {
    let outers_m1: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let outers_m2: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(80);
    let tol: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(-1.0);
    let total = Instant::now();
    for (model, n1, n2, gamma, outers) in
        [(1usize, 20usize, 20usize, 0.5f64, outers_m1), (2, 20, 16, 1.0, outers_m2)]
    {
        let mut ok_count = 0;
        for seed in 1..=5u64 {
            let t0 = Instant::now();
            let cfg = if model == 1 {
                ModelConfig::symmetric(0.3).unwrap()
            } else {
                ModelConfig::asymmetric(0.3).unwrap()
            };
            let inst = generate_instance(&cfg, n1, n2, 3, seed).unwrap();
            let phi;
            let psi;
            let oracle: &dyn ObjectiveOracle = if model == 1 {
                phi = phi_oracle(&inst).unwrap();
                &phi
            } else {
                psi = psi_oracle(&inst, &cfg).unwrap();
                &psi
            };
            let dim = oracle.dimension();
            let mut rng = GaussianSampler::from_seed_stream(seed, 1);
            let x0 = Point::new((0..dim).map(|_| rng.standard_normal()).collect()).unwrap();
            let params = EnvelopeParams::new(1.25, gamma).unwrap().with_theta_ls(0.8).unwrap();
            let schedule = ErrorSchedule::default();
            let budget = InnerBudgetSchedule::default();
            let solver = SgdssInner::default();
            let c: u64 = (0..outers).map(|k| budget.at(k) as u64).sum();

            let boosted = boosted_hippa_run(
                &x0,
                oracle,
                &params,
                &schedule,
                &budget,
                &StoppingRule::by_subgradient_calls(c).with_residual_tol(tol),
                &SpectralConfig::default(),
                50,
                &solver,
                None,
            );
            let boosted = match boosted {
                Ok(r) => r,
                Err(f) => {
                    println!("m{model} s{seed} boosted FAILED: {}", f.error);
                    continue;
                }
            };
            let b_calls = boosted.subgradient_calls;
            let b_final = boosted.trace.last().unwrap().objective_value;
            let b_parked =
                boosted.trace.iter().filter(|t| t.residual_norm == 0.0).count();

            let hippa = hippa_run(
                &x0,
                oracle,
                &params,
                &schedule,
                &budget,
                &StoppingRule::by_subgradient_calls(c).with_residual_tol(tol),
                &solver,
                None,
            );
            let hippa = match hippa {
                Ok(r) => r,
                Err(f) => {
                    println!("m{model} s{seed} hippa FAILED: {}", f.error);
                    continue;
                }
            };
            let h_final = hippa.trace.last().unwrap().objective_value;
            let h_calls = hippa.subgradient_calls;
            let h_parked = hippa.trace.iter().filter(|t| t.residual_norm == 0.0).count();
            let h_last_move = hippa
                .trace
                .iter()
                .rev()
                .find(|t| t.residual_norm > 0.0)
                .map(|t| t.k)
                .unwrap_or(0);

            let rules = [
                ("dss", StepRule::GeometricDecay { lambda: 1.0, q: 0.93 }),
                ("css.01", StepRule::Constant { alpha: 0.01 }),
                ("css.1", StepRule::Constant { alpha: 0.1 }),
                ("css1", StepRule::Constant { alpha: 1.0 }),
                ("pss", StepRule::Polyak { f_low: 0.0 }),
            ];
            let mut base = Vec::new();
            for (name, rule) in &rules {
                match run_subgradient(oracle, &x0, rule, c as usize, |_, _, _, _| {}) {
                    Ok(out) => base.push((*name, out.best_value)),
                    Err(e) => {
                        println!("m{model} s{seed} {name} FAILED: {e}");
                        base.push((*name, f64::INFINITY));
                    }
                }
            }
            let min_base = base.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            let ordered = b_final <= h_final && h_final <= min_base;
            if ordered {
                ok_count += 1;
            }
            let bres = boosted.trace.last().unwrap().residual_norm;
            let hres = hippa.trace.last().unwrap().residual_norm;
            println!(
                "m{model} s{seed} C={c} bC={b_calls} hC={h_calls} b={b_final:.9} h={h_final:.9} minbase={min_base:.9} [{}] bres={bres:.2e} hres={hres:.2e} bpark={b_parked} hpark={h_parked} hmove@{h_last_move} stop={:?} {}s",
                base.iter()
                    .map(|(n, v)| format!("{n}={v:.6}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                boosted.stop_reason,
                t0.elapsed().as_secs_f64().round(),
            );
            println!(
                "  margins: h-b={:+.3e} minbase-h={:+.3e}{}",
                h_final - b_final,
                min_base - h_final,
                if ordered { "" } else { "  ORDER VIOLATION" },
            );
        }
        println!("model {model}: {ok_count}/5 ordered");
    }
    println!("total {:.1}s", total.elapsed().as_secs_f64());
}
