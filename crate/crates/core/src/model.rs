//! Component labels, brain-factor modes and the structural rules that decide
//! which brain states are ready and which transitions are admissible.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed label: {0}")]
    MalformedLabel(String),
    #[error("invalid brain factor: {0}")]
    InvalidBrainFactor(String),
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ObserverId(pub u16);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct DetectorId(pub u16);

/// Mode of a brain factor.
///
/// `Unknown` is the state an observer is in before turning attention to the
/// apparatus; `Unconscious` cannot support experience at all. Neither is ever
/// eligible for a stochastic hit.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum BrainMode {
    Conscious,
    Ready,
    Unconscious,
    Unknown,
}

impl BrainMode {
    /// Conscious or ready: the brain state is engaged with the apparatus.
    pub fn is_active(self) -> bool {
        matches!(self, BrainMode::Conscious | BrainMode::Ready)
    }

    pub fn name(self) -> &'static str {
        match self {
            BrainMode::Conscious => "conscious",
            BrainMode::Ready => "ready",
            BrainMode::Unconscious => "unconscious",
            BrainMode::Unknown => "unknown",
        }
    }
}

impl FromStr for BrainMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conscious" => Ok(BrainMode::Conscious),
            "ready" => Ok(BrainMode::Ready),
            "unconscious" => Ok(BrainMode::Unconscious),
            "unknown" => Ok(BrainMode::Unknown),
            other => Err(ModelError::InvalidBrainFactor(format!(
                "unknown brain mode `{other}`"
            ))),
        }
    }
}

/// What a brain state is about.
///
/// `Percept` is a state correlated with a detector reading (`seen` captures in
/// the watched area) at drift site `site`; site 0 is the original state and
/// sites 1.. are its qualitatively different neighbours.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum BrainLabel {
    Percept { seen: u32, site: u8 },
    Unknown,
    Unconscious,
}

impl BrainLabel {
    pub fn percept(seen: u32) -> Self {
        BrainLabel::Percept { seen, site: 0 }
    }

    /// The mode a factor with this label is allowed to take.
    fn admits(self, mode: BrainMode) -> bool {
        match self {
            BrainLabel::Unknown => mode == BrainMode::Unknown,
            BrainLabel::Unconscious => mode == BrainMode::Unconscious,
            BrainLabel::Percept { .. } => mode.is_active(),
        }
    }
}

impl fmt::Display for BrainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BrainLabel::Unknown => f.write_str("X"),
            BrainLabel::Unconscious => f.write_str("U"),
            BrainLabel::Percept { seen, site } => {
                write!(f, "b{seen}")?;
                if site > 0 {
                    write!(f, "{}", site_suffix(site))?;
                }
                Ok(())
            }
        }
    }
}

/// Sites 1..=26 are `a`..`z`, later sites continue as `aa`, `ab`, ...
fn site_suffix(site: u8) -> String {
    let mut n = site as u32;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
    }
    out.iter().rev().collect()
}

fn parse_site_suffix(s: &str) -> Option<u8> {
    let mut n: u32 = 0;
    for c in s.chars() {
        if !c.is_ascii_lowercase() {
            return None;
        }
        n = n * 26 + (c as u32 - 'a' as u32 + 1);
        if n > u8::MAX as u32 {
            return None;
        }
    }
    Some(n as u8)
}

impl FromStr for BrainLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ModelError::InvalidBrainFactor(format!("unrecognised brain state `{s}`"));
        match s {
            "X" => return Ok(BrainLabel::Unknown),
            "U" => return Ok(BrainLabel::Unconscious),
            _ => {}
        }
        let rest = s.strip_prefix('b').ok_or_else(bad)?;
        let digits_end = rest
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(rest.len());
        if digits_end == 0 {
            return Err(bad());
        }
        let seen: u32 = rest[..digits_end].parse().map_err(|_| bad())?;
        let site = if digits_end == rest.len() {
            0
        } else {
            parse_site_suffix(&rest[digits_end..]).ok_or_else(bad)?
        };
        Ok(BrainLabel::Percept { seen, site })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BrainFactor {
    pub observer: ObserverId,
    pub label: BrainLabel,
    pub mode: BrainMode,
}

impl BrainFactor {
    pub fn new(observer: ObserverId, label: BrainLabel, mode: BrainMode) -> Result<Self, ModelError> {
        if !label.admits(mode) {
            return Err(ModelError::InvalidBrainFactor(format!(
                "brain state {label} cannot be {}",
                mode.name()
            )));
        }
        Ok(BrainFactor { observer, label, mode })
    }
}

/// One factor of a superposition component. The derived ordering is the
/// canonical one: the wave first, then detectors by id, then observers by id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactorState {
    ParticleWave { remaining: u32 },
    Detector { detector: DetectorId, captures: Vec<u32> },
    Brain(BrainFactor),
}

/// A canonical product of factor states naming one superposition component.
///
/// Only [`canonicalize`] builds these, so two labels are the same component
/// exactly when they compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComponentLabel {
    factors: Vec<FactorState>,
}

/// Sorts factors into canonical order and rejects duplicate waves, detectors
/// or observers.
pub fn canonicalize(factors: impl IntoIterator<Item = FactorState>) -> Result<ComponentLabel, ModelError> {
    let mut factors: Vec<FactorState> = factors.into_iter().collect();
    factors.sort();
    for pair in factors.windows(2) {
        let dup = match (&pair[0], &pair[1]) {
            (FactorState::ParticleWave { .. }, FactorState::ParticleWave { .. }) => {
                Some("more than one particle wave".to_string())
            }
            (FactorState::Detector { detector: a, .. }, FactorState::Detector { detector: b, .. })
                if a == b =>
            {
                Some(format!("detector #{} appears twice", a.0))
            }
            (FactorState::Brain(a), FactorState::Brain(b)) if a.observer == b.observer => {
                Some(format!("observer #{} has two brain factors", a.observer.0))
            }
            _ => None,
        };
        if let Some(reason) = dup {
            return Err(ModelError::MalformedLabel(reason));
        }
    }
    Ok(ComponentLabel { factors })
}

impl ComponentLabel {
    pub fn factors(&self) -> &[FactorState] {
        &self.factors
    }

    pub fn wave_remaining(&self) -> Option<u32> {
        self.factors.iter().find_map(|f| match f {
            FactorState::ParticleWave { remaining } => Some(*remaining),
            _ => None,
        })
    }

    pub fn captures(&self, detector: DetectorId) -> Option<&[u32]> {
        self.factors.iter().find_map(|f| match f {
            FactorState::Detector { detector: d, captures } if *d == detector => Some(captures.as_slice()),
            _ => None,
        })
    }

    pub fn brains(&self) -> impl Iterator<Item = &BrainFactor> + '_ {
        self.factors.iter().filter_map(|f| match f {
            FactorState::Brain(b) => Some(b),
            _ => None,
        })
    }

    pub fn brain(&self, observer: ObserverId) -> Option<&BrainFactor> {
        self.brains().find(|b| b.observer == observer)
    }

    pub fn has_mode(&self, mode: BrainMode) -> bool {
        self.brains().any(|b| b.mode == mode)
    }

    pub fn total_captures(&self) -> u32 {
        self.factors
            .iter()
            .map(|f| match f {
                FactorState::Detector { captures, .. } => captures.iter().sum(),
                _ => 0,
            })
            .sum()
    }

    /// Every ready factor becomes conscious; everything else is unchanged.
    pub fn promote_ready(&self) -> ComponentLabel {
        let factors = self
            .factors
            .iter()
            .map(|f| match f {
                FactorState::Brain(b) if b.mode == BrainMode::Ready => FactorState::Brain(BrainFactor {
                    mode: BrainMode::Conscious,
                    ..*b
                }),
                other => other.clone(),
            })
            .collect();
        ComponentLabel { factors }
    }

    /// Replaces factors in place. Replacements must keep the factor's
    /// identity (same wave, detector or observer), so ordering is preserved.
    pub(crate) fn map_factors(&self, mut f: impl FnMut(&FactorState) -> FactorState) -> ComponentLabel {
        ComponentLabel {
            factors: self.factors.iter().map(&mut f).collect(),
        }
    }

    pub fn display<'a>(&'a self, names: &'a Names) -> LabelDisplay<'a> {
        LabelDisplay { label: self, names }
    }
}

/// Human-readable names for the ids used inside labels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Names {
    pub wave: String,
    pub detectors: Vec<String>,
    pub observers: Vec<String>,
}

impl Names {
    pub fn detector(&self, id: DetectorId) -> &str {
        self.detectors.get(id.0 as usize).map(String::as_str).unwrap_or("?")
    }

    pub fn observer(&self, id: ObserverId) -> &str {
        self.observers.get(id.0 as usize).map(String::as_str).unwrap_or("?")
    }
}

/// Renders a label in the scenario-language literal syntax, e.g.
/// `[psi(1) D(0) alice(b0, conscious)]`.
pub struct LabelDisplay<'a> {
    label: &'a ComponentLabel,
    names: &'a Names,
}

impl fmt::Display for LabelDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, factor) in self.label.factors.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match factor {
                FactorState::ParticleWave { remaining } => write!(f, "{}({remaining})", self.names.wave)?,
                FactorState::Detector { detector, captures } => {
                    write!(f, "{}(", self.names.detector(*detector))?;
                    for (j, c) in captures.iter().enumerate() {
                        if j > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{c}")?;
                    }
                    f.write_str(")")?;
                }
                FactorState::Brain(b) => {
                    write!(f, "{}({}, {})", self.names.observer(b.observer), b.label, b.mode.name())?
                }
            }
        }
        f.write_str("]")
    }
}

/// Mode of a brain factor created or carried by a new component.
///
/// A factor whose state is unchanged keeps its mode (classically continuous
/// carry-through); a changed state, or a factor with no counterpart in the
/// source, is a fresh entanglement and becomes ready. Unknown and unconscious
/// states always carry their own mode.
pub fn rule2_target_mode(source: Option<&BrainFactor>, target_label: &BrainLabel) -> BrainMode {
    match target_label {
        BrainLabel::Unknown => BrainMode::Unknown,
        BrainLabel::Unconscious => BrainMode::Unconscious,
        BrainLabel::Percept { .. } => match source {
            Some(src) if src.label == *target_label => src.mode,
            _ => BrainMode::Ready,
        },
    }
}

/// A transition is forbidden when some observer holds a ready brain state on
/// both sides of it, whether or not the two ready states are the same.
pub fn rule4_allows(source: &ComponentLabel, target: &ComponentLabel) -> bool {
    !source.brains().any(|s| {
        s.mode == BrainMode::Ready
            && target
                .brain(s.observer)
                .is_some_and(|t| t.mode == BrainMode::Ready)
    })
}
