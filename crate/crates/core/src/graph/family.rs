use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{build_distance_threshold_graph, complete_graph, grid_graph, star_graph, Domain, PolicyGraph};
use crate::error::{Error, Result};

/// Named policy families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyFamily {
    /// `G^1_k`, one-dimensional domains only.
    Line,
    /// `G^1_{k^d}`.
    Grid,
    /// `G^θ_{k^d}`.
    Theta,
    /// Every cell joined to `Bot` (unbounded differential privacy).
    Star,
    /// All pairs of cells (bounded differential privacy).
    Complete,
}

impl PolicyFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyFamily::Line => "line",
            PolicyFamily::Grid => "grid",
            PolicyFamily::Theta => "theta",
            PolicyFamily::Star => "star",
            PolicyFamily::Complete => "complete",
        }
    }
}

impl fmt::Display for PolicyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "line" => PolicyFamily::Line,
            "grid" => PolicyFamily::Grid,
            "theta" => PolicyFamily::Theta,
            "star" => PolicyFamily::Star,
            "complete" => PolicyFamily::Complete,
            _ => {
                return Err(Error::invalid(format!(
                    "unknown policy family {s:?} (expected line, grid, theta, star or complete)"
                )))
            }
        })
    }
}

/// A policy family plus its threshold (only meaningful for `Theta`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicySpec {
    pub family: PolicyFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<usize>,
}

impl PolicySpec {
    pub fn new(family: PolicyFamily, theta: Option<usize>) -> Result<Self> {
        let spec = PolicySpec { family, theta };
        spec.check()?;
        Ok(spec)
    }

    pub fn star() -> Self {
        PolicySpec { family: PolicyFamily::Star, theta: None }
    }

    pub fn check(&self) -> Result<()> {
        match (self.family, self.theta) {
            (PolicyFamily::Theta, None) => Err(Error::invalid("policy family theta needs a theta value")),
            (PolicyFamily::Theta, Some(0)) => Err(Error::invalid("theta must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn build(&self, domain: &Domain) -> Result<PolicyGraph> {
        self.check()?;
        match self.family {
            PolicyFamily::Line if domain.d() != 1 => {
                Err(Error::invalid(format!("the line policy needs a 1-D domain, got {:?}; use grid", domain.dims())))
            }
            PolicyFamily::Line | PolicyFamily::Grid => grid_graph(domain),
            PolicyFamily::Theta => build_distance_threshold_graph(domain, self.theta.unwrap_or(1), false),
            PolicyFamily::Star => Ok(star_graph(domain)),
            PolicyFamily::Complete => complete_graph(domain),
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta {
            Some(t) if self.family == PolicyFamily::Theta => write!(f, "theta({t})"),
            _ => write!(f, "{}", self.family),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_and_parse() {
        let d = Domain::line(5).unwrap();
        let spec = PolicySpec::new("theta".parse().unwrap(), Some(2)).unwrap();
        assert_eq!(spec.build(&d).unwrap().edges().len(), 7);
        assert_eq!(spec.to_string(), "theta(2)");
        assert!(PolicySpec::new(PolicyFamily::Theta, None).is_err());
        assert!("ring".parse::<PolicyFamily>().is_err());
        let d2 = Domain::new(vec![2, 2]).unwrap();
        assert!(PolicySpec::new(PolicyFamily::Line, None).unwrap().build(&d2).is_err());
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"theta","theta":2}"#);
        assert_eq!(serde_json::from_str::<PolicySpec>(&json).unwrap(), spec);
    }
}
