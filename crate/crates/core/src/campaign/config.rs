use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CampaignError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentMode {
    Crowdsourced,
    Tournament,
}

/// Campaign parameters, stored as TOML.
///
/// Requires `round_robin_threshold > pairings > k >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Size of the top set to identify.
    pub k: usize,
    /// Pools at or below this size go straight to the round robin (`F`).
    pub round_robin_threshold: usize,
    /// Partners per candidate in a reduction round (`P`).
    pub pairings: usize,
    /// Real pairs per HIT.
    pub hit_size: usize,
    pub challenges_per_hit: usize,
    pub mode: AssessmentMode,
    pub seed: u64,
    /// Seconds a leased batch or pair stays reserved for one assessor.
    pub lease_timeout_secs: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            k: 5,
            round_robin_threshold: 9,
            pairings: 7,
            hit_size: 10,
            challenges_per_hit: 3,
            mode: AssessmentMode::Crowdsourced,
            seed: 0,
            lease_timeout_secs: 900,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.k == 0 {
            return Err(CampaignError::Config("k must be at least 1".into()));
        }
        if !(self.round_robin_threshold > self.pairings && self.pairings > self.k) {
            return Err(CampaignError::Config(format!(
                "need round_robin_threshold > pairings > k, got {} > {} > {}",
                self.round_robin_threshold, self.pairings, self.k
            )));
        }
        if self.hit_size == 0 {
            return Err(CampaignError::Config("hit_size must be at least 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        let config: CampaignConfig =
            toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = crate::trec_io::read_text(path)?;
        Self::from_toml(&text)
    }
}
