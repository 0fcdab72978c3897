//! Value types shared by every stage of the pipeline.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Model tier of one pipeline stage.
///
/// `H` is the heavier, more accurate model; `L` the lighter, faster one.
/// `H > L` so escalation logic can compare tiers directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    L,
    H,
}

impl Tier {
    pub const ALL: [Tier; 2] = [Tier::H, Tier::L];

    pub fn as_char(self) -> char {
        match self {
            Tier::H => 'H',
            Tier::L => 'L',
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H" | "h" => Ok(Tier::H),
            "L" | "l" => Ok(Tier::L),
            other => Err(format!("unknown tier `{other}` (expected H or L)")),
        }
    }
}

/// The four model-selectable stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Od,
    Asr,
    Tc,
    Gr,
}

impl Engine {
    pub const ALL: [Engine; 4] = [Engine::Od, Engine::Asr, Engine::Tc, Engine::Gr];

    pub fn name(self) -> &'static str {
        match self {
            Engine::Od => "OD",
            Engine::Asr => "ASR",
            Engine::Tc => "TC",
            Engine::Gr => "GR",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Tier selection for the (OD, ASR, TC, GR) stages, written e.g. `HHLH`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Combo {
    pub od: Tier,
    pub asr: Tier,
    pub tc: Tier,
    pub gr: Tier,
}

impl Combo {
    pub const fn new(od: Tier, asr: Tier, tc: Tier, gr: Tier) -> Self {
        Self { od, asr, tc, gr }
    }

    pub fn tier(&self, engine: Engine) -> Tier {
        match engine {
            Engine::Od => self.od,
            Engine::Asr => self.asr,
            Engine::Tc => self.tc,
            Engine::Gr => self.gr,
        }
    }

    /// All 16 combinations in table order (HHHH first, LLLL last).
    pub fn all() -> Vec<Combo> {
        let mut out = Vec::with_capacity(16);
        for od in Tier::ALL {
            for asr in Tier::ALL {
                for tc in Tier::ALL {
                    for gr in Tier::ALL {
                        out.push(Combo::new(od, asr, tc, gr));
                    }
                }
            }
        }
        out
    }

    /// Number of stages running the heavy model.
    pub fn heavy_count(&self) -> usize {
        Engine::ALL.iter().filter(|e| self.tier(**e) == Tier::H).count()
    }
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}{}", self.od, self.asr, self.tc, self.gr)
    }
}

impl FromStr for Combo {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() != 4 {
            return Err(format!("combo `{s}` must have exactly 4 tiers"));
        }
        let t = |c: char| c.to_string().parse::<Tier>();
        Ok(Combo::new(t(chars[0])?, t(chars[1])?, t(chars[2])?, t(chars[3])?))
    }
}

/// Point on the virtual clock, in milliseconds since the start of a trial.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(f64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0.0);

    /// Panics on negative or non-finite input; timestamps come from the
    /// virtual clock or from validated trace files.
    pub fn from_ms(ms: f64) -> Self {
        assert!(ms.is_finite() && ms >= 0.0, "invalid timestamp {ms}");
        Timestamp(ms)
    }

    pub fn try_from_ms(ms: f64) -> Option<Self> {
        (ms.is_finite() && ms >= 0.0).then_some(Timestamp(ms))
    }

    pub fn ms(self) -> f64 {
        self.0
    }

    pub fn max(self, other: Timestamp) -> Timestamp {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Timestamp) -> Timestamp {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Eq for Timestamp {}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add<f64> for Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: f64) -> Timestamp {
        Timestamp::from_ms((self.0 + rhs).max(0.0))
    }
}

impl Sub for Timestamp {
    type Output = f64;

    fn sub(self, rhs: Timestamp) -> f64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}ms", self.0)
    }
}

/// Position in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn in_unit_square(&self) -> bool {
        (0.0..=1.0).contains(&self.x) && (0.0..=1.0).contains(&self.y)
    }

    pub fn clamped(self) -> Point {
        Point::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }
}

/// Four-component resource vector: RAM (MB), CPU (%), GPU (%), VRAM (MB).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub ram_mb: f64,
    pub cpu_pct: f64,
    pub gpu_pct: f64,
    pub vram_mb: f64,
}

impl Resources {
    pub const DIMENSIONS: [&'static str; 4] = ["ram_mb", "cpu_pct", "gpu_pct", "vram_mb"];

    pub const fn new(ram_mb: f64, cpu_pct: f64, gpu_pct: f64, vram_mb: f64) -> Self {
        Self { ram_mb, cpu_pct, gpu_pct, vram_mb }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.ram_mb, self.cpu_pct, self.gpu_pct, self.vram_mb]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

impl Add for Resources {
    type Output = Resources;

    fn add(self, rhs: Resources) -> Resources {
        Resources::new(
            self.ram_mb + rhs.ram_mb,
            self.cpu_pct + rhs.cpu_pct,
            self.gpu_pct + rhs.gpu_pct,
            self.vram_mb + rhs.vram_mb,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tier_ordering() {
        assert!(Tier::H > Tier::L);
        assert_eq!("h".parse::<Tier>().unwrap(), Tier::H);
        assert!("M".parse::<Tier>().is_err());
    }

    #[test]
    fn combo_roundtrip_and_order() {
        let all = Combo::all();
        assert_eq!(all.len(), 16);
        assert_eq!(all[0].to_string(), "HHHH");
        assert_eq!(all[15].to_string(), "LLLL");
        for c in &all {
            assert_eq!(c.to_string().parse::<Combo>().unwrap(), *c);
        }
        assert!("HHH".parse::<Combo>().is_err());
    }

    #[test]
    fn timestamp_rejects_negative() {
        assert!(Timestamp::try_from_ms(-1.0).is_none());
        assert!(Timestamp::try_from_ms(f64::NAN).is_none());
        assert_eq!(Timestamp::from_ms(5.0) - Timestamp::from_ms(2.0), 3.0);
    }
}
