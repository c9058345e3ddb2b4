use anyhow::anyhow;
use serde_json::json;
use std::fmt::Write as _;
use std::path::Path;

use conflow::flow::FlowConfig;
use conflow::marked_sphere::{
    alpha_invariant, classify_stability, euler_characteristic, predict_limit_divisor, Divisor, StabilityClass, Weight,
};
use conflow::soliton::{mu_table, soliton_profile};

use crate::{CmdResult, Failure, EXIT_OK};

/// Divisor from positional weights or from the `[divisor]` section of a file.
fn load_divisor(config: Option<&Path>, weights: &[String]) -> Result<Divisor, Failure> {
    match (config, weights.is_empty()) {
        (Some(_), false) => Err(Failure::usage(anyhow!("give either --config or weights, not both"))),
        (None, true) => Err(Failure::usage(anyhow!("no divisor: pass weights or --config FILE"))),
        (Some(p), true) => Ok(FlowConfig::load(p).map_err(Failure::usage)?.divisor().map_err(Failure::usage)?),
        (None, false) => {
            let w = weights.iter().map(|s| Weight::parse(s)).collect::<conflow::Result<Vec<_>>>();
            Ok(Divisor::from_weights(w.map_err(Failure::usage)?).map_err(Failure::usage)?)
        }
    }
}

/// Short decimal: at most 12 significant decimals, trailing zeros dropped,
/// at least one decimal kept.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0');
    if s.ends_with('.') {
        format!("{s}0")
    } else {
        s.to_string()
    }
}

fn one_based(v: &[usize]) -> String {
    let v: Vec<String> = v.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", v.join(","))
}

pub fn classify(config: Option<&Path>, weights: &[String], as_json: bool) -> CmdResult {
    let d = load_divisor(config, weights)?;
    let class = classify_stability(&d).map_err(Failure::usage)?;
    let chi = euler_characteristic(&d);
    let alpha = alpha_invariant(&d).ok();
    let limit = match class {
        StabilityClass::Stable => None,
        _ => Some(predict_limit_divisor(&d).map_err(Failure::usage)?),
    };
    if as_json {
        let v = json!({
            "weights": d.weights(),
            "class": class,
            "chi": chi,
            "alpha": alpha,
            "predicted_limit": limit,
            "warning": d.small_k_warning(),
        });
        println!("{}", serde_json::to_string_pretty(&v)?);
        return Ok(EXIT_OK);
    }
    let mut line = format!("{class}, χ={}", num(chi));
    if let Some(a) = alpha {
        write!(line, ", α={}", num(a)).unwrap();
    }
    if let Some(l) = &limit {
        write!(line, ", predicted β_∞=({},{})", num(l.beta_p), num(l.beta_q)).unwrap();
        if l.conditional {
            line.push_str(" [conditional on the initial entropy]");
        }
    }
    println!("{line}");
    if let Some(w) = d.small_k_warning() {
        eprintln!("warning: {w}");
    }
    Ok(EXIT_OK)
}

pub fn soliton_table(config: Option<&Path>, weights: &[String], as_json: bool, out: Option<&Path>) -> CmdResult {
    let d = load_divisor(config, weights)?;
    let table = mu_table(&d)?;
    let value = json!({ "weights": d.weights(), "table": table });
    let mut text = String::new();
    let ws: Vec<String> = d.weights().iter().map(|w| w.to_string()).collect();
    writeln!(text, "divisor ({}), points numbered 1..{} by increasing weight", ws.join(", "), d.k()).unwrap();
    writeln!(text, "{:>3}  {:<12} {:<12} {:>8} {:>8} {:>14} {:>14} {:>18}", "#", "side p", "side q", "beta_p", "beta_q", "tau", "c", "W").unwrap();
    for (i, e) in table.entries.iter().enumerate() {
        let p = &e.partition;
        writeln!(
            text,
            "{:>3}  {:<12} {:<12} {:>8} {:>8} {:>14.10} {:>14.10} {:>18.12}",
            i + 1,
            one_based(&p.side_p),
            one_based(&p.side_q),
            num(p.beta_p),
            num(p.beta_q),
            e.spec.tau,
            e.spec.c,
            e.spec.w
        )
        .unwrap();
    }
    for p in &table.excluded {
        writeln!(text, "  excluded {} | {}: side weight {} >= 1", one_based(&p.side_p), one_based(&p.side_q), num(p.beta_p)).unwrap();
    }
    match table.threshold {
        Some(t) => writeln!(text, "threshold (mu_2) = {t:.12}").unwrap(),
        None => writeln!(text, "threshold undefined").unwrap(),
    }
    for w in &table.warnings {
        eprintln!("warning: {w}");
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        print!("{text}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir.join("profiles"))?;
        std::fs::write(dir.join("soliton_table.json"), serde_json::to_string_pretty(&value)?)?;
        std::fs::write(dir.join("soliton_table.txt"), &text)?;
        for (i, e) in table.entries.iter().enumerate() {
            let prof = soliton_profile(e.spec.beta_p, e.spec.beta_q, 200)?;
            std::fs::write(dir.join("profiles").join(format!("profile_{:02}.csv", i + 1)), prof.to_csv())?;
        }
    }
    Ok(EXIT_OK)
}
