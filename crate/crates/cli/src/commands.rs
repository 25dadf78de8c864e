use std::io::Write;
use std::path::Path;

use andor_core::dynamics::{
    log_grid, order_ratio_curve, simulate_noisy_interaction, simulate_training_trajectory,
    solve_optimal_weights, GroundTruthWeights, TrainingSegment,
};
use andor_core::io::{
    format_decomposition, format_distribution, format_interactions, format_noise_stats,
    format_ratio_curve, format_table, format_trajectory, parse_decomposition, parse_distribution,
    parse_table, DecompositionHeader,
};
use andor_core::metrics::{fit_sigma, order_distribution, salience_threshold_with, theo_distribution_with};
use andor_core::sparsify::{
    delta_bound_with, optimize_decomposition, sparsify_loss, Decomposition, SparsifyConfig,
};
use andor_core::subsets::binomial;
use andor_core::synth::{
    add_output_noise, converged_outputs, generate_ground_truth, spindle_initialization,
    GroundTruthSpec, OrderSupport,
};
use andor_core::{
    salient_set, AndOrInteractions, InteractionVector, MaskedOutputTable,
    SalientSet, SubsetTable,
};
use serde_json::{json, Value};

use crate::verify::{run_checks, Status};
use crate::{
    DistributionArgs, ExtractArgs, Failure, FitArgs, GridArgs, McNoiseArgs, PredictArgs,
    SimulateArgs, SparsifyArgs, Split, SplitArgs, SweepArgs, SynthArgs, VerifyArgs,
};

type Outcome = Result<(), Failure>;

fn meta(config: &str) -> Vec<(String, String)> {
    vec![("config".to_string(), config.to_string())]
}

fn config_value(config: &str) -> Value {
    serde_json::from_str(config).expect("configuration is valid JSON")
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn table_text(sample_id: &str, table: &SubsetTable, config: &str) -> String {
    format!("# config={config}\n{}", format_table(sample_id, table))
}

fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON value serializes");
    s.push('\n');
    s
}

fn read_masked(path: &Path) -> Result<MaskedOutputTable, Failure> {
    Ok(parse_table(path)?.into_masked())
}

fn read_weights(path: &Path) -> Result<GroundTruthWeights, Failure> {
    Ok(parse_table(path)?.into_weights())
}

fn grid(args: &GridArgs) -> Result<Vec<f64>, Failure> {
    match &args.grid {
        Some(g) => Ok(g.clone()),
        None => {
            let (lo, hi) = (args.sigma2_min, args.sigma2_max);
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) || args.grid_points == 0 {
                return Err(Failure::Usage(format!(
                    "log grid needs 0 < sigma2-min <= sigma2-max and at least one point, got [{lo}, {hi}] x {}",
                    args.grid_points
                )));
            }
            Ok(log_grid(lo, hi, args.grid_points))
        }
    }
}

fn split_interactions(v: &MaskedOutputTable, args: &SplitArgs) -> Result<AndOrInteractions, Failure> {
    let zeta = delta_bound_with(v, args.zeta_factor);
    let dec = match args.split {
        Split::Even => Decomposition::even(v.n(), zeta)?,
        Split::Sparse => {
            let cfg = SparsifyConfig {
                max_iters: args.max_iters,
                convergence_tol: args.tol,
                zeta_factor: args.zeta_factor,
                ..SparsifyConfig::default()
            };
            optimize_decomposition(v, &cfg)?.0
        }
    };
    Ok(dec.interactions(v)?)
}

fn salient_json(set: &SalientSet) -> Value {
    let members: Vec<Value> = set
        .members
        .iter()
        .map(|(s, e)| json!({ "mask": s.bits(), "order": s.order(), "effect": e }))
        .collect();
    json!({
        "count": set.len(),
        "counts_by_order": set.counts_by_order,
        "members": members,
    })
}

pub fn extract(a: &ExtractArgs, config: &str) -> Outcome {
    let v = read_masked(&a.input)?;
    let both = match &a.decomposition {
        Some(path) => {
            let (dec, _) = parse_decomposition(&std::fs::read_to_string(path)?)?;
            dec.interactions(&v)?
        }
        None => split_interactions(&v, &a.split)?,
    };
    let tau = salience_threshold_with(std::slice::from_ref(&v), a.tau_factor)?;
    let report = json!({
        "config": config_value(config),
        "sample_id": v.sample_id(),
        "tau": tau,
        "and": salient_json(&salient_set(&both.and, tau)?),
        "or": salient_json(&salient_set(&both.or, tau)?),
    });
    emit(a.out.as_deref(), &format_interactions(&both, &meta(config)))?;
    match &a.salient_out {
        Some(p) => std::fs::write(p, json_text(&report))?,
        None => eprint!("{}", json_text(&report)),
    }
    Ok(())
}

pub fn sparsify(a: &SparsifyArgs, config: &str) -> Outcome {
    let v = read_masked(&a.input)?;
    let cfg = SparsifyConfig {
        max_iters: a.max_iters,
        learning_rate: a.learning_rate,
        convergence_tol: a.tol,
        zeta_factor: a.zeta_factor,
        ..SparsifyConfig::default()
    };
    let (dec, diag) = optimize_decomposition(&v, &cfg)?;
    let header = DecompositionHeader {
        n: v.n(),
        zeta: dec.zeta_bound(),
        loss: sparsify_loss(&dec, &v)?,
        converged: diag.converged,
    };
    emit(a.out.as_deref(), &format_decomposition(&dec, &header, &meta(config))?)?;
    if let Some(p) = &a.interactions_out {
        std::fs::write(p, format_interactions(&dec.interactions(&v)?, &meta(config)))?;
    }
    Ok(())
}

pub fn predict(a: &PredictArgs, config: &str) -> Outcome {
    let w_star = read_weights(&a.weights)?;
    let w_hat = solve_optimal_weights(&w_star, a.sigma2)?;
    emit(a.out.as_deref(), &table_text("w_hat", &w_hat, config))
}

pub fn sweep(a: &SweepArgs, config: &str) -> Outcome {
    let curve = order_ratio_curve(a.n, &grid(&a.grid)?)?;
    emit(a.out.as_deref(), &format_ratio_curve(&curve, &meta(config)))
}

pub fn fit(a: &FitArgs, config: &str) -> Outcome {
    let real = parse_distribution(&std::fs::read_to_string(&a.real)?)?;
    let w_star = read_weights(&a.weights)?;
    let fit = fit_sigma(&real, &w_star, &grid(&a.grid)?)?;
    let mut value = json!({ "config": config_value(config) });
    if let (Value::Object(dst), Value::Object(src)) =
        (&mut value, serde_json::to_value(&fit).map_err(andor_core::Error::from)?)
    {
        dst.extend(src);
    }
    emit(a.out.as_deref(), &json_text(&value))
}

fn parse_segment(spec: &str) -> Result<TrainingSegment, Failure> {
    let bad = || Failure::Usage(format!("schedule segment {spec:?} is not σ²:steps[:lr]"));
    let parts: Vec<&str> = spec.trim().split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    Ok(TrainingSegment {
        sigma2: parts[0].parse().map_err(|_| bad())?,
        steps: parts[1].parse().map_err(|_| bad())?,
        learning_rate: match parts.get(2) {
            Some(lr) => Some(lr.parse().map_err(|_| bad())?),
            None => None,
        },
    })
}

pub fn simulate(a: &SimulateArgs, config: &str) -> Outcome {
    let w_star = read_weights(&a.weights)?;
    let schedule = a
        .schedule
        .iter()
        .map(|s| parse_segment(s))
        .collect::<Result<Vec<_>, _>>()?;
    let init = match &a.init {
        Some(p) => parse_table(p)?.table,
        None => spindle_initialization(w_star.n(), a.init_seed)?,
    };
    let record = simulate_training_trajectory(&init, &w_star, &schedule)?;
    emit(a.out.as_deref(), &format_trajectory(&record, &meta(config)))?;
    if let (Some(p), Some(w)) = (&a.weights_out, record.final_weights()) {
        std::fs::write(p, table_text("trained", w, config))?;
    }
    Ok(())
}

pub fn mc_noise(a: &McNoiseArgs, config: &str) -> Outcome {
    let v = read_masked(&a.input)?;
    let stats = simulate_noisy_interaction(&v, a.sigma, a.trials, a.seed)?;
    emit(a.out.as_deref(), &format_noise_stats(&stats, &meta(config)))
}

pub fn distribution(a: &DistributionArgs, config: &str) -> Outcome {
    let dist = match &a.theo {
        Some(path) => theo_distribution_with(&parse_table(path)?.table, a.tau_factor)?,
        None => {
            let samples = a
                .inputs
                .iter()
                .map(|p| read_masked(p))
                .collect::<Result<Vec<_>, _>>()?;
            let tau = salience_threshold_with(&samples, a.tau_factor)?;
            let vectors = samples
                .iter()
                .map(|v| {
                    let both = split_interactions(v, &a.split)?;
                    Ok(if a.and_only { vec![both.and] } else { vec![both.and, both.or] })
                })
                .collect::<Result<Vec<Vec<InteractionVector>>, Failure>>()?;
            order_distribution(&vectors, tau)?
        }
    };
    emit(a.out.as_deref(), &format_distribution(&dist, &meta(config)))
}

pub fn verify(a: &VerifyArgs, config: &str) -> Outcome {
    let outcomes = run_checks(a.n, a.seed)?;
    let mut text = format!("# config={config}\n");
    for o in &outcomes {
        text.push_str(&o.line());
        text.push('\n');
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| o.status == Status::Fail)
        .map(|o| o.name.to_string())
        .collect();
    text.push_str(&format!(
        "{} checks, {} failed, {} skipped\n",
        outcomes.len(),
        failed.len(),
        outcomes.iter().filter(|o| o.status == Status::Skipped).count()
    ));
    emit(a.out.as_deref(), &text)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failed))
    }
}

pub fn synth(a: &SynthArgs, config: &str) -> Outcome {
    let max_order = a.max_order.unwrap_or(a.n);
    if a.min_order == 0 || a.min_order > max_order || max_order > a.n {
        return Err(Failure::Usage(format!(
            "orders must satisfy 1 <= min-order <= max-order <= n, got {}..={max_order} with n = {}",
            a.min_order, a.n
        )));
    }
    let spec = GroundTruthSpec {
        n: a.n,
        orders: (a.min_order..=max_order)
            .map(|k| OrderSupport {
                order: k,
                count: a.count.min(binomial(a.n, k) as usize),
                min_magnitude: a.min_magnitude,
                max_magnitude: a.max_magnitude,
            })
            .collect(),
        sign: a.sign.into(),
        empty_value: a.empty_value,
        seed: a.seed,
    };
    let w_star = generate_ground_truth(&spec)?;
    std::fs::write(&a.weights_out, table_text("w_star", w_star.table(), config))?;
    if let Some(p) = &a.outputs_out {
        let clean = converged_outputs(&w_star)?;
        let v = add_output_noise(&clean, a.noise_sigma, a.seed.wrapping_add(1))?;
        std::fs::write(p, table_text(v.sample_id(), v.values(), config))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_segments() {
        let s = parse_segment("0.5:100").unwrap();
        assert_eq!((s.sigma2, s.steps, s.learning_rate), (0.5, 100, None));
        let s = parse_segment(" 1e-2:7:0.25 ").unwrap();
        assert_eq!((s.sigma2, s.steps, s.learning_rate), (0.01, 7, Some(0.25)));
        for bad in ["1", "1:2:3:4", "a:3", "1:-3", "1:2:x"] {
            assert!(matches!(parse_segment(bad), Err(Failure::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn itable_output_keeps_config_in_a_comment() {
        let t = SubsetTable::new(1, vec![0.5, -1.0]).unwrap();
        let text = table_text("x", &t, "{\"a\":1}");
        assert!(text.starts_with("# config={\"a\":1}\n"));
        let back = andor_core::io::parse_table_str(&text).unwrap();
        assert_eq!(back.table, t);
        assert_eq!(back.sample_id, "x");
    }
}
