//! JSON form of [`ApproachSpec`].
//!
//! A spec is either a bare string naming a preset or base approach
//! (`"P1.2"`, `"fold_fails"`) or an object tagged by `"type"`:
//!
//! ```json
//! {"type": "borda_mix", "children": [
//!     {"weight": 1, "spec": {"type": "fold_fails", "folder": "sum"}},
//!     {"weight": 0.5, "spec": "exe_time"}]}
//! ```

use serde_json::{json, Map, Value};
use tcp_lab_core::combinators::{CountMode, FolderKind, WeightedChild, DEFAULT_SCHULZE_CAP};
use tcp_lab_core::prioritizers::{DistanceMetric, StartPolicy};
use tcp_lab_core::smoothing::DEFAULT_ALPHA;
use tcp_lab_core::ApproachSpec;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid approach spec at {path}: {reason}")]
pub struct SpecParseError {
    pub path: String,
    pub reason: String,
}

type Result<T> = std::result::Result<T, SpecParseError>;

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(SpecParseError {
            path: self.path.clone(),
            reason: reason.into(),
        })
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.map.keys().find(|k| *k != "type" && !allowed.contains(&k.as_str())) {
            Some(k) => self.err(format!("unknown field `{k}`")),
            None => Ok(()),
        }
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => match v.as_f64() {
                Some(x) => Ok(x),
                None => self.err(format!("`{key}` must be a number")),
            },
        }
    }

    fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => match v.as_u64() {
                Some(x) => Ok(x),
                None => self.err(format!("`{key}` must be a non-negative integer")),
            },
        }
    }

    fn str_or(&self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.map.get(key) {
            None => Ok(default),
            Some(Value::String(s)) => Ok(s),
            Some(_) => self.err(format!("`{key}` must be a string")),
        }
    }

    fn spec(&self, key: &str) -> Result<ApproachSpec> {
        match self.map.get(key) {
            Some(v) => parse_at(v, format!("{}.{key}", self.path)),
            None => self.err(format!("missing `{key}`")),
        }
    }

    fn children(&self) -> Result<Vec<WeightedChild>> {
        let Some(Value::Array(items)) = self.map.get("children") else {
            return self.err("`children` must be an array");
        };
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let path = format!("{}.children[{i}]", self.path);
                let Value::Object(map) = item else {
                    return Err(SpecParseError {
                        path,
                        reason: "child must be an object with `weight` and `spec`".into(),
                    });
                };
                let child = Obj { map, path };
                child.check_keys(&["weight", "spec"])?;
                let weight = match map.get("weight").and_then(Value::as_f64) {
                    Some(w) => w,
                    None => return child.err("`weight` must be a number"),
                };
                Ok(WeightedChild::new(weight, child.spec("spec")?))
            })
            .collect()
    }
}

fn metric_from(name: &str) -> Option<DistanceMetric> {
    match name {
        "manhattan" => Some(DistanceMetric::Manhattan),
        "euclidean" => Some(DistanceMetric::Euclidean),
        "cosine" => Some(DistanceMetric::CosineDistance),
        _ => None,
    }
}

fn metric_name(m: DistanceMetric) -> &'static str {
    match m {
        DistanceMetric::Manhattan => "manhattan",
        DistanceMetric::Euclidean => "euclidean",
        DistanceMetric::CosineDistance => "cosine",
    }
}

pub fn parse(value: &Value) -> Result<ApproachSpec> {
    parse_at(value, "$".into())
}

pub fn parse_str(text: &str) -> Result<ApproachSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| SpecParseError {
        path: "$".into(),
        reason: e.to_string(),
    })?;
    parse(&value)
}

fn parse_at(value: &Value, path: String) -> Result<ApproachSpec> {
    let map = match value {
        Value::String(name) => return Ok(ApproachSpec::Named(name.clone())),
        Value::Object(map) => map,
        _ => {
            return Err(SpecParseError {
                path,
                reason: "expected a name or an object".into(),
            })
        }
    };
    let o = Obj { map, path };
    let Some(kind) = map.get("type").and_then(Value::as_str) else {
        return o.err("missing string field `type`");
    };
    let metric = |o: &Obj, default: &str| -> Result<DistanceMetric> {
        let name = o.str_or("metric", default)?;
        match metric_from(name) {
            Some(m) => Ok(m),
            None => o.err(format!("unknown metric `{name}`")),
        }
    };
    let spec = match kind {
        "base_order" => {
            o.check_keys(&[])?;
            ApproachSpec::BaseOrder
        }
        "random_order" => {
            o.check_keys(&["seed"])?;
            ApproachSpec::RandomOrder { seed: o.u64_or("seed", 0)? }
        }
        "recentness" => {
            o.check_keys(&[])?;
            ApproachSpec::Recentness
        }
        "fold_fails" => {
            o.check_keys(&["folder", "alpha"])?;
            let folder = match o.str_or("folder", "sum")? {
                "sum" => FolderKind::Sum,
                "exp_smooth" => FolderKind::ExpSmooth,
                other => return o.err(format!("unknown folder `{other}`")),
            };
            ApproachSpec::FoldFails {
                folder,
                alpha: o.f64_or("alpha", DEFAULT_ALPHA)?,
            }
        }
        "dfe" => {
            o.check_keys(&["alpha"])?;
            ApproachSpec::dfe(o.f64_or("alpha", DEFAULT_ALPHA)?)
        }
        "exe_time" => {
            o.check_keys(&["alpha"])?;
            ApproachSpec::ExeTime {
                alpha: o.f64_or("alpha", DEFAULT_ALPHA)?,
            }
        }
        "fail_density" => {
            o.check_keys(&["alpha_fail", "alpha_time"])?;
            ApproachSpec::FailDensity {
                alpha_fail: o.f64_or("alpha_fail", DEFAULT_ALPHA)?,
                alpha_time: o.f64_or("alpha_time", DEFAULT_ALPHA)?,
            }
        }
        "code_dist" => {
            o.check_keys(&["metric", "start"])?;
            let start = match o.str_or("start", "farthest_pair")? {
                "farthest_pair" => StartPolicy::FarthestPair,
                "first_case" => StartPolicy::FirstCase,
                other => return o.err(format!("unknown start policy `{other}`")),
            };
            ApproachSpec::CodeDist {
                metric: metric(&o, "cosine")?,
                start,
            }
        }
        "random_mix" => {
            o.check_keys(&["children", "seed"])?;
            ApproachSpec::RandomMix {
                children: o.children()?,
                seed: o.u64_or("seed", 0)?,
            }
        }
        "borda_mix" => {
            o.check_keys(&["children"])?;
            ApproachSpec::BordaMix { children: o.children()? }
        }
        "schulze_mix" => {
            o.check_keys(&["children", "cap"])?;
            ApproachSpec::SchulzeMix {
                children: o.children()?,
                cap: o.u64_or("cap", DEFAULT_SCHULZE_CAP as u64)? as usize,
            }
        }
        "interpolate" => {
            o.check_keys(&["before", "after", "cutoff", "count"])?;
            let count_mode = match o.str_or("count", "failed_cycles")? {
                "failed_cycles" => CountMode::FailedCycles,
                "all_cycles" => CountMode::AllCycles,
                other => return o.err(format!("unknown count mode `{other}`")),
            };
            let Some(cutoff) = map.get("cutoff").and_then(Value::as_u64) else {
                return o.err("`cutoff` must be a non-negative integer");
            };
            ApproachSpec::Interpolate {
                before: Box::new(o.spec("before")?),
                after: Box::new(o.spec("after")?),
                cutoff,
                count_mode,
            }
        }
        "break_ties" => {
            o.check_keys(&["primary", "secondary"])?;
            ApproachSpec::BreakTies {
                primary: Box::new(o.spec("primary")?),
                secondary: Box::new(o.spec("secondary")?),
            }
        }
        "break_ties_code_dist" => {
            o.check_keys(&["primary", "metric"])?;
            ApproachSpec::BreakTiesCodeDist {
                primary: Box::new(o.spec("primary")?),
                metric: metric(&o, "cosine")?,
            }
        }
        "preset" => {
            o.check_keys(&["name"])?;
            match map.get("name").and_then(Value::as_str) {
                Some(name) => ApproachSpec::Named(name.to_string()),
                None => return o.err("`name` must be a string"),
            }
        }
        other => return o.err(format!("unknown type `{other}`")),
    };
    Ok(spec)
}

fn children_json(children: &[WeightedChild]) -> Value {
    Value::Array(
        children
            .iter()
            .map(|c| json!({"weight": c.weight, "spec": to_json(&c.spec)}))
            .collect(),
    )
}

/// Serializes a spec; [`parse`] reads the result back unchanged.
pub fn to_json(spec: &ApproachSpec) -> Value {
    match spec {
        ApproachSpec::BaseOrder => json!({"type": "base_order"}),
        ApproachSpec::RandomOrder { seed } => json!({"type": "random_order", "seed": seed}),
        ApproachSpec::Recentness => json!({"type": "recentness"}),
        ApproachSpec::FoldFails { folder, alpha } => json!({
            "type": "fold_fails",
            "folder": match folder { FolderKind::Sum => "sum", FolderKind::ExpSmooth => "exp_smooth" },
            "alpha": alpha,
        }),
        ApproachSpec::ExeTime { alpha } => json!({"type": "exe_time", "alpha": alpha}),
        ApproachSpec::FailDensity { alpha_fail, alpha_time } => {
            json!({"type": "fail_density", "alpha_fail": alpha_fail, "alpha_time": alpha_time})
        }
        ApproachSpec::CodeDist { metric, start } => json!({
            "type": "code_dist",
            "metric": metric_name(*metric),
            "start": match start { StartPolicy::FarthestPair => "farthest_pair", StartPolicy::FirstCase => "first_case" },
        }),
        ApproachSpec::RandomMix { children, seed } => {
            json!({"type": "random_mix", "children": children_json(children), "seed": seed})
        }
        ApproachSpec::BordaMix { children } => json!({"type": "borda_mix", "children": children_json(children)}),
        ApproachSpec::SchulzeMix { children, cap } => {
            json!({"type": "schulze_mix", "children": children_json(children), "cap": cap})
        }
        ApproachSpec::Interpolate {
            before,
            after,
            cutoff,
            count_mode,
        } => json!({
            "type": "interpolate",
            "before": to_json(before),
            "after": to_json(after),
            "cutoff": cutoff,
            "count": match count_mode { CountMode::FailedCycles => "failed_cycles", CountMode::AllCycles => "all_cycles" },
        }),
        ApproachSpec::BreakTies { primary, secondary } => {
            json!({"type": "break_ties", "primary": to_json(primary), "secondary": to_json(secondary)})
        }
        ApproachSpec::BreakTiesCodeDist { primary, metric } => {
            json!({"type": "break_ties_code_dist", "primary": to_json(primary), "metric": metric_name(*metric)})
        }
        ApproachSpec::Named(name) => Value::String(name.clone()),
    }
}
