//! Browser bindings. Every export returns a JSON string for the page to plot.

use rennala_core::numeric::derive_seed;
use rennala_core::{
    collect_batch, prog, run_method, sample_delays, t_of_b, ChainInstance, DelayModel,
    DelayProfile, Hyper, Method, MethodKind, Payload, QuadraticProblem, RunConfig,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn delay_model(kind: &str) -> Result<DelayModel, String> {
    match kind {
        "sqrt" => Ok(DelayModel::Sqrt { permute: true }),
        "uniform" => Ok(DelayModel::Uniform { lo: None, hi: None }),
        "mixture" => Ok(DelayModel::Mixture {
            peaks: 3,
            stddev: None,
        }),
        other => Err(format!("unknown delay model {other:?}")),
    }
}

fn parse_taus(taus: &str) -> Result<DelayProfile, String> {
    let v = taus
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad tau {s:?}: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    DelayProfile::new(v).map_err(|e| e.to_string())
}

/// Simulated time to collect `b` gradients (or pairs) against `T(b)`, for `b = 1..=b_max`.
pub fn collection_times_json(taus: &str, b_max: usize, pairs: bool) -> Result<String, String> {
    let profile = parse_taus(taus)?;
    let payload = if pairs {
        Payload::Pair
    } else {
        Payload::Single
    };
    let (mut bs, mut sim, mut bound) = (Vec::new(), Vec::new(), Vec::new());
    for b in 1..=b_max.max(1) {
        let c = collect_batch(&profile, b, payload, 0.0, true).map_err(|e| e.to_string())?;
        bs.push(b);
        sim.push(c.finish);
        bound.push(t_of_b(&profile, b as f64).value);
    }
    Ok(json!({ "b": bs, "simulated": sim, "t_of_b": bound, "pairs": pairs }).to_string())
}

#[wasm_bindgen]
pub fn collection_times(taus: &str, b_max: usize, pairs: bool) -> Result<String, JsError> {
    collection_times_json(taus, b_max, pairs).map_err(js_err)
}

fn thin(xs: Vec<f64>, ys: Vec<f64>, max: usize) -> (Vec<f64>, Vec<f64>) {
    if xs.len() <= max {
        return (xs, ys);
    }
    let step = xs.len().div_ceil(max);
    let keep: Vec<usize> = (0..xs.len())
        .step_by(step)
        .chain(std::iter::once(xs.len() - 1))
        .collect();
    (
        keep.iter().map(|&i| xs[i]).collect(),
        keep.iter().map(|&i| ys[i]).collect(),
    )
}

/// Rennala SGD against Rennala MVR on the quadratic, same delays and seed.
#[allow(clippy::too_many_arguments)]
pub fn race_json(
    delay: &str,
    workers: usize,
    dim: usize,
    budget: f64,
    seed: u64,
    sgd_gamma: f64,
    sgd_b: usize,
    mvr_gamma: f64,
    mvr_b: usize,
    p: f64,
) -> Result<String, String> {
    let model = delay_model(delay)?;
    let profile =
        sample_delays(&model, workers, derive_seed(&[seed])).map_err(|e| e.to_string())?;
    let q = QuadraticProblem::new(dim, 0.1).map_err(|e| e.to_string())?;
    let x0 = q.benchmark_start();
    let methods = [
        (
            "sgd",
            Method {
                kind: MethodKind::RennalaSgd,
                hyper: Hyper::sgd(sgd_gamma, sgd_b),
            },
        ),
        (
            "mvr",
            Method {
                kind: MethodKind::RennalaMvr,
                hyper: Hyper::mvr(mvr_gamma, p, mvr_b, mvr_b),
            },
        ),
    ];
    let mut out = serde_json::Map::new();
    for (i, (name, m)) in methods.into_iter().enumerate() {
        m.hyper.validate().map_err(|e| e.to_string())?;
        let cfg = RunConfig::new(budget, derive_seed(&[seed, i as u64]));
        let trace = run_method(&q, m, x0.clone(), &profile, cfg).map_err(|e| e.to_string())?;
        let (t, g) = thin(
            trace.records.iter().map(|r| r.time).collect(),
            trace.records.iter().map(|r| r.grad_sq_norm).collect(),
            400,
        );
        out.insert(
            name.into(),
            json!({ "time": t, "grad_sq_norm": g, "rounds": trace.records.len() - 1 }),
        );
    }
    out.insert("taus".into(), json!(profile.taus()));
    Ok(serde_json::Value::Object(out).to_string())
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn race(
    delay: &str,
    workers: usize,
    dim: usize,
    budget: f64,
    seed: u64,
    sgd_gamma: f64,
    sgd_b: usize,
    mvr_gamma: f64,
    mvr_b: usize,
    p: f64,
) -> Result<String, JsError> {
    race_json(
        delay, workers, dim, budget, seed, sgd_gamma, sgd_b, mvr_gamma, mvr_b, p,
    )
    .map_err(js_err)
}

/// Gradient descent on the chain function fed by the probability-`p`
/// zero-chain oracle; reports `prog_0` of the iterate after each call.
pub fn zero_chain_walk_json(
    t: usize,
    p: f64,
    calls: usize,
    step: f64,
    seed: u64,
) -> Result<String, String> {
    let inst = ChainInstance::with_default_resolution(t).map_err(|e| e.to_string())?;
    let mut x = vec![0.0; t];
    let mut progress = vec![0usize];
    let mut hits = 0usize;
    for k in 0..calls {
        let u = derive_seed(&[seed, k as u64]) as f64 / 2f64.powi(64);
        let xi = u < p;
        hits += xi as usize;
        let g = inst.zero_chain_grad(&x, xi, p).map_err(|e| e.to_string())?;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
        progress.push(prog(&x, 0.0));
    }
    Ok(json!({ "progress": progress, "successes": hits, "t": t, "p": p }).to_string())
}

#[wasm_bindgen]
pub fn zero_chain_walk(
    t: usize,
    p: f64,
    calls: usize,
    step: f64,
    seed: u64,
) -> Result<String, JsError> {
    zero_chain_walk_json(t, p, calls, step, seed).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn collection_times_stay_below_bound() {
        let v = parse(&collection_times_json("1,2,4", 30, false).unwrap());
        let sim = v["simulated"].as_array().unwrap();
        let bound = v["t_of_b"].as_array().unwrap();
        assert_eq!(sim.len(), 30);
        assert!(sim
            .iter()
            .zip(bound)
            .all(|(s, b)| s.as_f64().unwrap() <= b.as_f64().unwrap()));
        assert!(collection_times_json("1,0", 3, false).is_err());
    }

    #[test]
    fn race_produces_both_traces() {
        let v = parse(&race_json("sqrt", 4, 10, 200.0, 1, 0.1, 4, 0.2, 4, 0.1).unwrap());
        for m in ["sgd", "mvr"] {
            let t = v[m]["time"].as_array().unwrap();
            assert!(t.len() > 1 && t.len() <= 401);
            assert_eq!(t[0].as_f64(), Some(0.0));
        }
        assert!(race_json("lognormal", 4, 10, 200.0, 1, 0.1, 4, 0.2, 4, 0.1).is_err());
    }

    #[test]
    fn zero_chain_progress_moves_one_step_at_a_time() {
        let v = parse(&zero_chain_walk_json(10, 0.3, 200, 0.5, 3).unwrap());
        let prog: Vec<u64> = v["progress"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap())
            .collect();
        assert_eq!(prog.len(), 201);
        assert!(prog.windows(2).all(|w| w[1] <= w[0] + 1));
        assert!(*prog.last().unwrap() <= v["successes"].as_u64().unwrap());
    }
}
