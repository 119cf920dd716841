//! Attribution reports and their CSV / JSON serializations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::permutation::Symmetry;
use crate::value::Variant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub feature: String,
    pub phi: f64,
    /// Present when the run decomposed contributions.
    pub direct: Option<f64>,
    pub indirect: Option<f64>,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub variant: Variant,
    pub symmetry: Symmetry,
    pub seed: Option<u64>,
    /// `None` for exact value functions.
    pub n_samples: Option<usize>,
    /// `None` when the permutation support was enumerated exactly.
    pub n_permutations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub features: Vec<FeatureAttribution>,
    pub f0: f64,
    pub f0_stderr: f64,
    pub fx: f64,
    pub meta: ReportMeta,
}

impl AttributionReport {
    pub fn phi(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.phi).collect()
    }

    /// `Σ φ_i − (f(x) − f0)`.
    pub fn efficiency_gap(&self) -> f64 {
        self.features.iter().map(|f| f.phi).sum::<f64>() - (self.fx - self.f0)
    }

    /// Combined standard error of [`AttributionReport::efficiency_gap`],
    /// treating all terms as independent.
    pub fn efficiency_stderr(&self) -> f64 {
        (self.features.iter().map(|f| f.stderr * f.stderr).sum::<f64>() + self.f0_stderr * self.f0_stderr).sqrt()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }

    /// CSV with `#key,value` metadata rows followed by one row per feature.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let opt = |v: Option<String>| v.unwrap_or_default();
        let meta = [
            ("#variant", self.meta.variant.to_string()),
            ("#symmetry", symmetry_str(self.meta.symmetry).to_string()),
            ("#seed", opt(self.meta.seed.map(|s| s.to_string()))),
            ("#n_samples", opt(self.meta.n_samples.map(|s| s.to_string()))),
            ("#n_permutations", self.meta.n_permutations.map_or_else(|| "exact".to_string(), |p| p.to_string())),
            ("#f0", self.f0.to_string()),
            ("#f0_stderr", self.f0_stderr.to_string()),
            ("#fx", self.fx.to_string()),
        ];
        for (k, v) in meta {
            w.write_record([k, v.as_str()]).expect("in-memory write");
        }
        w.write_record(["feature", "phi", "direct", "indirect", "stderr"]).expect("in-memory write");
        for f in &self.features {
            w.write_record([
                f.feature.clone(),
                f.phi.to_string(),
                opt(f.direct.map(|v| v.to_string())),
                opt(f.indirect.map(|v| v.to_string())),
                f.stderr.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Config(format!("malformed report csv: {m}"));
        let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
        let mut meta = std::collections::HashMap::new();
        let mut features = Vec::new();
        let mut header_seen = false;
        for record in r.records() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let first = record.get(0).unwrap_or_default();
            if let Some(key) = first.strip_prefix('#') {
                meta.insert(key.to_string(), record.get(1).unwrap_or_default().to_string());
            } else if !header_seen {
                if record.iter().collect::<Vec<_>>() != ["feature", "phi", "direct", "indirect", "stderr"] {
                    return Err(bad("unexpected column header".into()));
                }
                header_seen = true;
            } else {
                if record.len() != 5 {
                    return Err(bad(format!("row for `{first}` has {} fields", record.len())));
                }
                let num = |k: usize| record[k].parse::<f64>().map_err(|e| bad(format!("`{}`: {e}", &record[k])));
                let opt = |k: usize| if record[k].is_empty() { Ok(None) } else { num(k).map(Some) };
                features.push(FeatureAttribution {
                    feature: first.to_string(),
                    phi: num(1)?,
                    direct: opt(2)?,
                    indirect: opt(3)?,
                    stderr: num(4)?,
                });
            }
        }
        let get = |k: &str| meta.get(k).cloned().ok_or_else(|| bad(format!("missing `#{k}`")));
        let float = |k: &str| get(k)?.parse::<f64>().map_err(|e| bad(format!("#{k}: {e}")));
        let optional = |k: &str| -> Result<Option<String>> {
            let v = get(k)?;
            Ok(if v.is_empty() { None } else { Some(v) })
        };
        let symmetry = match get("symmetry")?.as_str() {
            "symmetric" => Symmetry::Symmetric,
            "asymmetric" => Symmetry::Asymmetric,
            other => return Err(bad(format!("unknown symmetry `{other}`"))),
        };
        let n_permutations = match get("n_permutations")?.as_str() {
            "exact" => None,
            v => Some(v.parse().map_err(|e| bad(format!("#n_permutations: {e}")))?),
        };
        Ok(AttributionReport {
            features,
            f0: float("f0")?,
            f0_stderr: float("f0_stderr")?,
            fx: float("fx")?,
            meta: ReportMeta {
                variant: get("variant")?.parse()?,
                symmetry,
                seed: optional("seed")?.map(|s| s.parse().map_err(|e| bad(format!("#seed: {e}")))).transpose()?,
                n_samples: optional("n_samples")?
                    .map(|s| s.parse().map_err(|e| bad(format!("#n_samples: {e}"))))
                    .transpose()?,
                n_permutations,
            },
        })
    }
}

pub fn symmetry_str(s: Symmetry) -> &'static str {
    match s {
        Symmetry::Symmetric => "symmetric",
        Symmetry::Asymmetric => "asymmetric",
    }
}

/// One explained instance for sina-plot data.
pub struct SinaInstance<'a> {
    pub id: usize,
    pub x: &'a [f64],
    pub report: &'a AttributionReport,
}

/// Long-format CSV `instance,feature,feature_value,phi`.
pub fn write_sina<W: Write>(out: W, instances: &[SinaInstance<'_>]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "feature", "feature_value", "phi"])?;
    for inst in instances {
        for (f, x) in inst.report.features.iter().zip(inst.x) {
            w.write_record([inst.id.to_string(), f.feature.clone(), x.to_string(), f.phi.to_string()])?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AttributionReport {
        AttributionReport {
            features: vec![
                FeatureAttribution { feature: "x1".into(), phi: 0.1 + 0.2, direct: Some(-1e-300), indirect: Some(0.3), stderr: 0.0 },
                FeatureAttribution { feature: "a,b".into(), phi: -2.5, direct: None, indirect: None, stderr: 1.0 / 3.0 },
            ],
            f0: 1.0 / 7.0,
            f0_stderr: 0.01,
            fx: -3.0,
            meta: ReportMeta {
                variant: Variant::Causal,
                symmetry: Symmetry::Asymmetric,
                seed: Some(u64::MAX),
                n_samples: None,
                n_permutations: Some(64),
            },
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        assert_eq!(AttributionReport::from_csv(&r.to_csv()).unwrap(), r);
        let mut exact = r.clone();
        exact.meta.n_permutations = None;
        exact.meta.seed = None;
        assert_eq!(AttributionReport::from_csv(&exact.to_csv()).unwrap(), exact);
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        assert_eq!(AttributionReport::from_json(&r.to_json()).unwrap(), r);
    }

    #[test]
    fn csv_layout() {
        let text = sample().to_csv();
        assert!(text.starts_with("#variant,causal\n#symmetry,asymmetric\n"));
        assert!(text.contains("\nfeature,phi,direct,indirect,stderr\n"));
        assert!(text.contains("\"a,b\",-2.5,,,"));
    }

    #[test]
    fn sina_rows() {
        let r = sample();
        let mut out = Vec::new();
        write_sina(&mut out, &[SinaInstance { id: 3, x: &[1.5, 2.0], report: &r }]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("3,x1,1.5,0.30000000000000004"));
    }
}
