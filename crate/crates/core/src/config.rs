//! Fusion runtime configuration.
//!
//! The on-disk form is a flat TOML document. Every key is optional; absent
//! keys take the defaults below.
//!
//! ```toml
//! od = "H"                 # object detection tier
//! asr = "H"                # speech recognition tier
//! tc = "H"                 # text classification tier
//! gr = "H"                 # gesture recognition tier
//! vision_wait_ms = 5000    # bounded wait for a vision result (> 0)
//! match_window_ms = 2000   # speech/gesture soft-match window (>= 0)
//! frames_per_output = 5    # frames per vision output (>= 1)
//! pointing_hold_ms = 4000  # how long an unpaired pointing token waits for speech (>= 0)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{Combo, Tier};

pub const DEFAULT_VISION_WAIT_MS: f64 = 5000.0;
pub const DEFAULT_MATCH_WINDOW_MS: f64 = 2000.0;
pub const DEFAULT_FRAMES_PER_OUTPUT: u32 = 5;
pub const DEFAULT_POINTING_HOLD_MS: f64 = 4000.0;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("malformed config document: {0}")]
    Malformed(String),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub od: Tier,
    pub asr: Tier,
    pub tc: Tier,
    pub gr: Tier,
    pub vision_wait_ms: f64,
    pub match_window_ms: f64,
    pub frames_per_output: u32,
    pub pointing_hold_ms: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self::for_combo(Combo::new(Tier::H, Tier::H, Tier::H, Tier::H))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    od: Option<Tier>,
    asr: Option<Tier>,
    tc: Option<Tier>,
    gr: Option<Tier>,
    vision_wait_ms: Option<f64>,
    match_window_ms: Option<f64>,
    frames_per_output: Option<i64>,
    pointing_hold_ms: Option<f64>,
}

impl FusionConfig {
    pub fn for_combo(combo: Combo) -> Self {
        Self {
            od: combo.od,
            asr: combo.asr,
            tc: combo.tc,
            gr: combo.gr,
            vision_wait_ms: DEFAULT_VISION_WAIT_MS,
            match_window_ms: DEFAULT_MATCH_WINDOW_MS,
            frames_per_output: DEFAULT_FRAMES_PER_OUTPUT,
            pointing_hold_ms: DEFAULT_POINTING_HOLD_MS,
        }
    }

    pub fn combo(&self) -> Combo {
        Combo::new(self.od, self.asr, self.tc, self.gr)
    }

    pub fn with_combo(mut self, combo: Combo) -> Self {
        self.od = combo.od;
        self.asr = combo.asr;
        self.tc = combo.tc;
        self.gr = combo.gr;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.vision_wait_ms.is_finite() && self.vision_wait_ms > 0.0) {
            return Err(invalid("vision_wait_ms", format!("must be > 0, got {}", self.vision_wait_ms)));
        }
        if !(self.match_window_ms.is_finite() && self.match_window_ms >= 0.0) {
            return Err(invalid("match_window_ms", format!("must be >= 0, got {}", self.match_window_ms)));
        }
        if self.frames_per_output < 1 {
            return Err(invalid("frames_per_output", "must be >= 1".into()));
        }
        if !(self.pointing_hold_ms.is_finite() && self.pointing_hold_ms >= 0.0) {
            return Err(invalid("pointing_hold_ms", format!("must be >= 0, got {}", self.pointing_hold_ms)));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

fn invalid(field: &'static str, reason: String) -> ConfigError {
    ConfigError::Invalid { field, reason }
}

/// Parses a config document, filling defaults for absent keys.
pub fn parse_config(text: &str) -> Result<FusionConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Malformed(e.to_string()))?;
    let d = FusionConfig::default();
    let frames_per_output = match raw.frames_per_output {
        None => d.frames_per_output,
        Some(n) if n >= 1 && n <= u32::MAX as i64 => n as u32,
        Some(n) => return Err(invalid("frames_per_output", format!("must be >= 1, got {n}"))),
    };
    let cfg = FusionConfig {
        od: raw.od.unwrap_or(d.od),
        asr: raw.asr.unwrap_or(d.asr),
        tc: raw.tc.unwrap_or(d.tc),
        gr: raw.gr.unwrap_or(d.gr),
        vision_wait_ms: raw.vision_wait_ms.unwrap_or(d.vision_wait_ms),
        match_window_ms: raw.match_window_ms.unwrap_or(d.match_window_ms),
        frames_per_output,
        pointing_hold_ms: raw.pointing_hold_ms.unwrap_or(d.pointing_hold_ms),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.combo().to_string(), "HHHH");
        assert_eq!(cfg.vision_wait_ms, 5000.0);
        assert_eq!(cfg.match_window_ms, 2000.0);
        assert_eq!(cfg.frames_per_output, 5);
    }

    #[test]
    fn vision_wait_is_echoed() {
        let cfg = parse_config("vision_wait_ms = 5000").unwrap();
        assert_eq!(cfg.vision_wait_ms, 5000.0);
        let cfg = parse_config("vision_wait_ms = 750.5\nod = \"L\"").unwrap();
        assert_eq!(cfg.vision_wait_ms, 750.5);
        assert_eq!(cfg.od, Tier::L);
    }

    #[test]
    fn zero_vision_wait_names_the_field() {
        match parse_config("vision_wait_ms = 0") {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "vision_wait_ms"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn other_range_errors() {
        assert!(matches!(
            parse_config("frames_per_output = 0"),
            Err(ConfigError::Invalid { field: "frames_per_output", .. })
        ));
        assert!(matches!(
            parse_config("match_window_ms = -1"),
            Err(ConfigError::Invalid { field: "match_window_ms", .. })
        ));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_config("od = "), Err(ConfigError::Malformed(_))));
        assert!(matches!(parse_config("od = \"M\""), Err(ConfigError::Malformed(_))));
        assert!(matches!(parse_config("bogus = 1"), Err(ConfigError::Malformed(_))));
    }

    fn tier() -> impl Strategy<Value = Tier> {
        prop_oneof![Just(Tier::H), Just(Tier::L)]
    }

    proptest! {
        #[test]
        fn serialize_parse_is_fixed_point(
            od in tier(), asr in tier(), tc in tier(), gr in tier(),
            wait in 1.0f64..20_000.0, window in 0.0f64..5000.0, frames in 1u32..30,
            hold in 0.0f64..10_000.0,
        ) {
            let cfg = FusionConfig {
                od, asr, tc, gr,
                vision_wait_ms: wait,
                match_window_ms: window,
                frames_per_output: frames,
                pointing_hold_ms: hold,
            };
            let once = parse_config(&cfg.to_toml()).unwrap();
            prop_assert_eq!(once, cfg);
            let twice = parse_config(&once.to_toml()).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}
