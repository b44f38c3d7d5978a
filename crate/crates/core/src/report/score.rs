use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub wd: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { w1: 1.0 / 3.0, w2: 1.0 / 3.0, w3: 1.0 / 3.0, wd: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub model_id: String,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub d_raw: f64,
    pub weights: Weights,
    pub delta_bonus: f64,
    pub final_score: f64,
}

/// Chain the raw scores and combine them with the dissimilarity bonus.
pub fn score(s1: f64, s2: f64, s3: f64, d_raw: f64, weights: Weights) -> ScoreCard {
    let c1 = s1;
    let c2 = s2 * c1 / 100.0;
    let c3 = s3 * c2 / 100.0;
    let delta_bonus = weights.wd * d_raw;
    ScoreCard {
        model_id: String::new(),
        s1,
        s2,
        s3,
        c1,
        c2,
        c3,
        d_raw,
        weights,
        delta_bonus,
        final_score: weights.w1 * c1 + weights.w2 * c2 + weights.w3 * c3 + delta_bonus,
    }
}

impl ScoreCard {
    pub fn with_model(mut self, model_id: impl Into<String>) -> Self {
        self.model_id = model_id.into();
        self
    }
}

/// Raw scores at two decimals, final at one.
pub fn fmt_raw(x: f64) -> String {
    format!("{x:.2}")
}

pub fn fmt_final(x: f64) -> String {
    format!("{x:.1}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chaining() {
        let c = score(92.97, 89.61, 84.13, 31.8, Weights::default());
        assert!((c.c2 - 83.31).abs() < 0.005, "{}", c.c2);
        assert!((c.c3 - 70.09).abs() < 0.005, "{}", c.c3);
        assert_eq!(fmt_final(c.final_score), "85.3");
    }

    #[test]
    fn identities() {
        assert_eq!(fmt_final(score(100.0, 99.4, 100.0, 0.0, Weights::default()).final_score), "99.6");
        let full = score(100.0, 100.0, 100.0, 0.0, Weights::default());
        assert!((full.final_score - 100.0).abs() < 1e-9);
    }
}
