//! Edit specification strings.
//!
//! attr_edit:      comma-separated absolute edits: `color=r|g|b`,
//!                 `+brightness`/`-brightness`, `+size`, `-size`,
//!                 `+border`, `-border`
//! multi_domain:   weighted domain mix: `d1`, `0.5*d1+0.5*d2`
//! inpaint:        `cx,cy,dir` with fractions in [0,1] and dir = +1|-1

use crate::CliError;
use tcgan::scalar::dbl;
use tcgan::tasks::{Sample, ShapesAttrs, TaskAdapter, TaskKind};

#[derive(Debug, Clone, PartialEq)]
pub enum EditSpec {
    /// Absolute attribute targets (None = keep current).
    Attr {
        color: Option<usize>,
        brightness: Option<bool>,
        size: Option<bool>,
        border: Option<bool>,
    },
    /// Weights per domain; a fused style is any convex mix.
    DomainMix(Vec<f64>),
    /// Mask location plus direction.
    Inpaint { cx: f64, cy: f64, dir: f64 },
}

impl EditSpec {
    /// The full-strength raw transition for one dataset sample.
    pub fn transition_for<FS: tcgan::scalar::Scalar>(
        &self,
        adapter: &TaskAdapter,
        sample: &Sample<FS>,
    ) -> Result<Vec<f64>, CliError> {
        match self {
            EditSpec::Attr {
                color,
                brightness,
                size,
                border,
            } => {
                let mut target = ShapesAttrs::from_vector(&sample.z_x);
                if let Some(c) = color {
                    target.color = *c;
                }
                if let Some(b) = brightness {
                    target.bright = *b;
                }
                if let Some(s) = size {
                    target.large = *s;
                }
                if let Some(b) = border {
                    target.border = *b;
                }
                let raw = adapter.make_transition(&sample.z_x, &target.to_vector());
                let scale = adapter.load_scale();
                Ok(raw.iter().map(|v| v * scale).collect())
            }
            EditSpec::DomainMix(weights) => {
                let k = adapter.k_domains;
                Ok(weights.iter().map(|w| w - 1.0 / k as f64).collect())
            }
            EditSpec::Inpaint { cx, cy, dir } => {
                let _ = sample.t.len();
                let _ = dbl(sample.t[0]);
                Ok(vec![*cx, *cy, *dir])
            }
        }
    }
}

pub fn parse_edit_spec(text: &str, adapter: &TaskAdapter) -> Result<EditSpec, CliError> {
    match adapter.kind {
        TaskKind::AttrEdit => parse_attr(text),
        TaskKind::MultiDomain => parse_domain_mix(text, adapter.k_domains),
        TaskKind::Inpaint => parse_inpaint(text),
    }
}

fn parse_attr(text: &str) -> Result<EditSpec, CliError> {
    let mut spec = EditSpec::Attr {
        color: None,
        brightness: None,
        size: None,
        border: None,
    };
    let EditSpec::Attr {
        color,
        brightness,
        size,
        border,
    } = &mut spec
    else {
        unreachable!()
    };
    for token in text.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        if let Some(ch) = token.strip_prefix("color=") {
            *color = Some(match ch {
                "r" => 0,
                "g" => 1,
                "b" => 2,
                other => {
                    return Err(CliError::usage(format!(
                        "color must be r, g or b, got `{other}`"
                    )))
                }
            });
            continue;
        }
        let (sign, name) = match token.split_at(1) {
            ("+", rest) => (true, rest),
            ("-", rest) => (false, rest),
            _ => {
                return Err(CliError::usage(format!(
                    "edit token `{token}` must be color=<r|g|b> or ±brightness/±size/±border"
                )))
            }
        };
        match name {
            "brightness" => *brightness = Some(sign),
            "size" => *size = Some(sign),
            "border" => *border = Some(sign),
            other => {
                return Err(CliError::usage(format!(
                    "unknown attribute `{other}` (brightness, size, border)"
                )))
            }
        }
    }
    Ok(spec)
}

fn parse_domain_mix(text: &str, k: usize) -> Result<EditSpec, CliError> {
    let mut weights = vec![0.0f64; k];
    for term in text.split('+') {
        let term = term.trim();
        let (w, name) = match term.split_once('*') {
            Some((w, d)) => (
                w.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::usage(format!("bad weight in `{term}`")))?,
                d.trim(),
            ),
            None => (1.0, term),
        };
        let idx: usize = name
            .strip_prefix('d')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                CliError::usage(format!("domain term `{name}` must look like d1..d{k}"))
            })?;
        if idx == 0 || idx > k {
            return Err(CliError::usage(format!(
                "domain index {idx} out of range 1..={k}"
            )));
        }
        weights[idx - 1] += w;
    }
    Ok(EditSpec::DomainMix(weights))
}

fn parse_inpaint(text: &str) -> Result<EditSpec, CliError> {
    let parts: Vec<&str> = text.split(',').map(|s| s.trim()).collect();
    if parts.len() != 3 {
        return Err(CliError::usage("inpaint edit is `cx,cy,dir`"));
    }
    let cx: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::usage("bad cx fraction"))?;
    let cy: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::usage("bad cy fraction"))?;
    let dir: f64 = match parts[2] {
        "+1" | "1" => 1.0,
        "-1" => -1.0,
        other => {
            return Err(CliError::usage(format!(
                "direction must be +1 or -1, got `{other}`"
            )))
        }
    };
    if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&cy) {
        return Err(CliError::usage("mask center fractions must be in [0,1]"));
    }
    Ok(EditSpec::Inpaint { cx, cy, dir })
}
