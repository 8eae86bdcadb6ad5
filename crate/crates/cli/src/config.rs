//! Scenario configuration: one flat JSON document selected by its `command`
//! field. Parsing is strict (unknown fields are schema errors) and every
//! command-specific requirement is checked here, before any numerics run,
//! so that a bad document never produces a half-written report.

use serde::Deserialize;

/// The raw document. Everything beyond `command` is optional at parse time;
/// `validate` turns the applicable subset into a typed command and rejects
/// anything missing, ill-shaped, or inapplicable-but-present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: String,
    /// Scenario identifier echoed into the report; defaults to the command.
    #[serde(default)]
    id: Option<String>,

    // symalg
    #[serde(default)]
    family: Option<String>,
    #[serde(default)]
    n: Option<usize>,

    // integrate and the closure check
    #[serde(default)]
    metric: Option<MetricConfig>,
    #[serde(default)]
    kind: Option<String>,
    #[serde(default)]
    x0: Option<Vec<f64>>,
    #[serde(default)]
    u0: Option<Vec<f64>>,
    #[serde(default)]
    c0: Option<Vec<f64>>,
    #[serde(default)]
    arc: Option<f64>,
    #[serde(default)]
    step: Option<f64>,

    /// Pass tolerance; each command has a default and `--tol` overrides both.
    #[serde(default)]
    tol: Option<f64>,

    // check
    #[serde(default)]
    geometry: Option<String>,
    #[serde(default)]
    points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    fixture: Option<String>,
    /// Random directions per sample for the fixture-based checks.
    #[serde(default)]
    directions: Option<usize>,

    // suite
    #[serde(default)]
    fixtures_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub name: String,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Geodesic,
    Circle,
}

/// Fixture-backed geometries; the einstein and closure checks carry their
/// own command variants because they run on a metric, not a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckGeometry {
    Legendrean,
    Cr,
}

#[derive(Debug)]
pub enum Command {
    Symalg {
        family: String,
        n: usize,
    },
    Integrate {
        metric: MetricConfig,
        kind: CurveKind,
        x0: Vec<f64>,
        u0: Vec<f64>,
        c0: Option<Vec<f64>>,
        arc: f64,
        step: f64,
        tol: f64,
    },
    Check(CheckCommand),
    Suite {
        fixtures_dir: String,
    },
}

#[derive(Debug)]
pub enum CheckCommand {
    Einstein {
        metric: MetricConfig,
        points: Vec<Vec<f64>>,
        tol: f64,
    },
    Closure {
        metric: MetricConfig,
        x0: Vec<f64>,
        u0: Vec<f64>,
        arc: f64,
        step: f64,
        tol: f64,
    },
    Fixture {
        geometry: CheckGeometry,
        fixture: String,
        directions: usize,
        tol: f64,
    },
}

#[derive(Debug)]
pub struct Config {
    pub id: String,
    pub command_name: &'static str,
    pub command: Command,
}

/// Parses and validates the raw bytes of a config document. Every error
/// string names the offending field; callers map any error to the schema
/// exit code.
pub fn parse(raw: &[u8], tol_override: Option<f64>) -> Result<Config, String> {
    let raw: RawConfig =
        serde_json::from_slice(raw).map_err(|e| format!("config is not valid JSON: {e}"))?;
    let tol = |default: f64| tol_override.or(raw.tol).unwrap_or(default);

    let require = |field: &str, present: bool| -> Result<(), String> {
        if present {
            Ok(())
        } else {
            Err(format!(
                "command {:?} requires the field {field}",
                raw.command
            ))
        }
    };

    let (command_name, command) = match raw.command.as_str() {
        "symalg" => {
            require("family", raw.family.is_some())?;
            require("n", raw.n.is_some())?;
            let family = raw.family.clone().unwrap();
            if !matches!(family.as_str(), "conformal" | "legendrean" | "cr") {
                return Err(format!(
                    "family {family:?} is not conformal, legendrean, or cr"
                ));
            }
            let n = raw.n.unwrap();
            if n < 2 {
                return Err("n must be at least 2".into());
            }
            ("symalg", Command::Symalg { family, n })
        }
        "integrate" => {
            require("metric", raw.metric.is_some())?;
            require("kind", raw.kind.is_some())?;
            require("x0", raw.x0.is_some())?;
            require("u0", raw.u0.is_some())?;
            let metric = raw.metric.clone().unwrap();
            let kind = match raw.kind.as_deref().unwrap() {
                "geodesic" => CurveKind::Geodesic,
                "circle" => CurveKind::Circle,
                other => return Err(format!("kind {other:?} is not geodesic or circle")),
            };
            if kind == CurveKind::Circle && raw.c0.is_none() {
                return Err("kind \"circle\" requires the field c0".into());
            }
            let x0 = raw.x0.clone().unwrap();
            let u0 = raw.u0.clone().unwrap();
            for (name, v) in [
                ("x0", Some(&x0)),
                ("u0", Some(&u0)),
                ("c0", raw.c0.as_ref()),
            ] {
                if let Some(v) = v {
                    if v.len() != metric.n {
                        return Err(format!(
                            "{name} has length {}, metric dimension is {}",
                            v.len(),
                            metric.n
                        ));
                    }
                    if !v.iter().all(|x| x.is_finite()) {
                        return Err(format!("{name} has a non-finite entry"));
                    }
                }
            }
            let arc = raw.arc.unwrap_or(1.0);
            let step = raw.step.unwrap_or(1e-3);
            if !(arc > 0.0 && step > 0.0) {
                return Err("arc and step must be positive".into());
            }
            (
                "integrate",
                Command::Integrate {
                    metric,
                    kind,
                    x0,
                    u0,
                    c0: raw.c0.clone(),
                    arc,
                    step,
                    tol: tol(1e-6),
                },
            )
        }
        "check" => {
            require("geometry", raw.geometry.is_some())?;
            let check = match raw.geometry.as_deref().unwrap() {
                "einstein" => {
                    require("metric", raw.metric.is_some())?;
                    require("points", raw.points.is_some())?;
                    let metric = raw.metric.clone().unwrap();
                    let points = raw.points.clone().unwrap();
                    if points.is_empty() {
                        return Err("points must contain at least one sample".into());
                    }
                    for (i, p) in points.iter().enumerate() {
                        if p.len() != metric.n {
                            return Err(format!(
                                "points[{i}] has length {}, metric dimension is {}",
                                p.len(),
                                metric.n
                            ));
                        }
                    }
                    CheckCommand::Einstein {
                        metric,
                        points,
                        tol: tol(1e-7),
                    }
                }
                "closure" => {
                    require("metric", raw.metric.is_some())?;
                    require("x0", raw.x0.is_some())?;
                    require("u0", raw.u0.is_some())?;
                    let metric = raw.metric.clone().unwrap();
                    let x0 = raw.x0.clone().unwrap();
                    let u0 = raw.u0.clone().unwrap();
                    if x0.len() != metric.n || u0.len() != metric.n {
                        return Err("x0 and u0 must match the metric dimension".into());
                    }
                    CheckCommand::Closure {
                        metric,
                        x0,
                        u0,
                        arc: raw.arc.unwrap_or(0.4),
                        step: raw.step.unwrap_or(1e-3),
                        tol: tol(1e-6),
                    }
                }
                g @ ("legendrean" | "cr") => {
                    require("fixture", raw.fixture.is_some())?;
                    CheckCommand::Fixture {
                        geometry: if g == "legendrean" {
                            CheckGeometry::Legendrean
                        } else {
                            CheckGeometry::Cr
                        },
                        fixture: raw.fixture.clone().unwrap(),
                        directions: raw.directions.unwrap_or(50),
                        tol: tol(1e-9),
                    }
                }
                other => {
                    return Err(format!(
                        "geometry {other:?} is not einstein, closure, legendrean, or cr"
                    ))
                }
            };
            ("check", Command::Check(check))
        }
        "suite" => {
            require("fixtures_dir", raw.fixtures_dir.is_some())?;
            (
                "suite",
                Command::Suite {
                    fixtures_dir: raw.fixtures_dir.clone().unwrap(),
                },
            )
        }
        other => {
            return Err(format!(
                "command {other:?} is not symalg, integrate, check, or suite"
            ))
        }
    };

    Ok(Config {
        id: raw.id.unwrap_or_else(|| command_name.to_string()),
        command_name,
        command,
    })
}
