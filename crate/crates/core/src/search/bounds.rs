//! Admissible ranges of the scenario parameters and the normalized genotype
//! codec.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::ScenarioConfig;

/// Genotype vector with every component in `[0, 1]`.
pub type Genotype = Vec<f64>;

/// Scenario parameters in genotype order.
pub const PARAM_NAMES: [&str; 10] = [
    "x_ego", "x_adv", "l_ego", "l_adv", "tl_ego", "tl_adv", "h_ego", "h_adv", "s_ego", "s_adv",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    #[default]
    Continuous,
    Integer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub kind: ParamKind,
}

impl ParamRange {
    pub const fn continuous(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            kind: ParamKind::Continuous,
        }
    }

    pub const fn integer(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            kind: ParamKind::Integer,
        }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn decode(&self, x: f64) -> f64 {
        let p = self.min + x * self.width();
        match self.kind {
            ParamKind::Continuous => p,
            // round half up
            ParamKind::Integer => (p + 0.5).floor().clamp(self.min, self.max),
        }
    }

    pub fn encode(&self, name: &str, p: f64) -> Result<f64> {
        if !(self.min..=self.max).contains(&p) {
            return Err(Error::Contract(format!(
                "{name} = {p} outside [{}, {}]",
                self.min, self.max
            )));
        }
        if self.kind == ParamKind::Integer && p.fract() != 0.0 {
            return Err(Error::Contract(format!("{name} = {p} is not an integer")));
        }
        Ok(if self.width() == 0.0 {
            0.0
        } else {
            (p - self.min) / self.width()
        })
    }

    /// A normalized component drawn uniformly from the range: a real
    /// interval, or the integer set for integer kinds.
    pub fn sample_normalized<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ParamKind::Continuous => rng.gen::<f64>(),
            ParamKind::Integer => {
                let k = rng.gen_range(self.min as i64..=self.max as i64) as f64;
                if self.width() == 0.0 {
                    0.0
                } else {
                    (k - self.min) / self.width()
                }
            }
        }
    }

    fn canonicalize(&mut self, name: &str) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::config(name, "bounds must be finite"));
        }
        if self.min > self.max {
            log::warn!(
                "bounds for {name} are inverted ({} > {}); swapping",
                self.min,
                self.max
            );
            std::mem::swap(&mut self.min, &mut self.max);
        }
        if self.kind == ParamKind::Integer && (self.min.fract() != 0.0 || self.max.fract() != 0.0) {
            return Err(Error::config(name, "integer parameters need integral bounds"));
        }
        Ok(())
    }
}

/// Per-parameter ranges of the ten scenario parameters, optionally followed
/// by a failure-selection gene over `0..archive_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    ranges: [ParamRange; 10],
    archive_size: Option<usize>,
}

/// On-disk layout: one optional table per parameter name.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsFile {
    x_ego: Option<ParamRange>,
    x_adv: Option<ParamRange>,
    l_ego: Option<ParamRange>,
    l_adv: Option<ParamRange>,
    tl_ego: Option<ParamRange>,
    tl_adv: Option<ParamRange>,
    h_ego: Option<ParamRange>,
    h_adv: Option<ParamRange>,
    s_ego: Option<ParamRange>,
    s_adv: Option<ParamRange>,
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self::from_ranges(Self::TABLE).expect("built-in table is well formed")
    }
}

impl ParamBounds {
    /// Published parameter table, `x_adv` listed with its bounds inverted.
    pub const TABLE: [ParamRange; 10] = [
        ParamRange::continuous(247.0, 304.0),
        ParamRange::continuous(395.0, 364.0),
        ParamRange::integer(0.0, 1.0),
        ParamRange::integer(0.0, 1.0),
        ParamRange::integer(0.0, 1.0),
        ParamRange::integer(0.0, 1.0),
        ParamRange::continuous(-0.08, 0.08),
        ParamRange::continuous(-0.08, 0.08),
        ParamRange::continuous(20.0, 29.0),
        ParamRange::continuous(20.0, 29.0),
    ];

    pub fn from_ranges(mut ranges: [ParamRange; 10]) -> Result<Self> {
        for (r, name) in ranges.iter_mut().zip(PARAM_NAMES) {
            r.canonicalize(name)?;
        }
        Ok(Self {
            ranges,
            archive_size: None,
        })
    }

    /// Parses a TOML table keyed by parameter name; missing parameters keep
    /// their default range.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: BoundsFile = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        let mut ranges = Self::TABLE;
        let given = [
            file.x_ego, file.x_adv, file.l_ego, file.l_adv, file.tl_ego, file.tl_adv, file.h_ego,
            file.h_adv, file.s_ego, file.s_adv,
        ];
        for (r, g) in ranges.iter_mut().zip(given) {
            if let Some(g) = g {
                *r = g;
            }
        }
        Self::from_ranges(ranges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Adds the failure-selection gene over an archive of `n` entries.
    pub fn with_failure_ids(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("failure_id", "the failure archive is empty"));
        }
        self.archive_size = Some(n);
        Ok(self)
    }

    pub fn without_failure_ids(mut self) -> Self {
        self.archive_size = None;
        self
    }

    pub fn archive_size(&self) -> Option<usize> {
        self.archive_size
    }

    pub fn ranges(&self) -> &[ParamRange; 10] {
        &self.ranges
    }

    pub fn range(&self, name: &str) -> Option<&ParamRange> {
        PARAM_NAMES.iter().position(|n| *n == name).map(|i| &self.ranges[i])
    }

    fn failure_range(&self) -> Option<ParamRange> {
        self.archive_size
            .map(|n| ParamRange::integer(0.0, (n - 1) as f64))
    }

    /// All gene ranges in genotype order.
    pub fn genes(&self) -> Vec<ParamRange> {
        let mut g = self.ranges.to_vec();
        g.extend(self.failure_range());
        g
    }

    pub fn dim(&self) -> usize {
        10 + usize::from(self.archive_size.is_some())
    }

    pub fn decode(&self, x: &[f64]) -> Result<(ScenarioConfig, Option<usize>)> {
        if x.len() != self.dim() {
            return Err(Error::Contract(format!(
                "genotype has {} components, bounds expect {}",
                x.len(),
                self.dim()
            )));
        }
        let p: Vec<f64> = self.ranges.iter().zip(x).map(|(r, &v)| r.decode(v)).collect();
        let config = ScenarioConfig {
            x_ego: p[0],
            x_adv: p[1],
            l_ego: p[2] as usize,
            l_adv: p[3] as usize,
            tl_ego: p[4] as usize,
            tl_adv: p[5] as usize,
            h_ego: p[6],
            h_adv: p[7],
            s_ego: p[8],
            s_adv: p[9],
        };
        let id = self.failure_range().map(|r| r.decode(x[10]) as usize);
        Ok((config, id))
    }

    pub fn encode(&self, config: &ScenarioConfig, failure_id: Option<usize>) -> Result<Genotype> {
        let p = [
            config.x_ego,
            config.x_adv,
            config.l_ego as f64,
            config.l_adv as f64,
            config.tl_ego as f64,
            config.tl_adv as f64,
            config.h_ego,
            config.h_adv,
            config.s_ego,
            config.s_adv,
        ];
        let mut x = self
            .ranges
            .iter()
            .zip(p)
            .zip(PARAM_NAMES)
            .map(|((r, v), name)| r.encode(name, v))
            .collect::<Result<Genotype>>()?;
        match (self.failure_range(), failure_id) {
            (Some(r), Some(id)) => x.push(r.encode("failure_id", id as f64)?),
            (None, None) => {}
            (Some(_), None) => return Err(Error::Contract("failure_id required by the bounds".into())),
            (None, Some(_)) => return Err(Error::Contract("bounds have no failure_id gene".into())),
        }
        Ok(x)
    }

    /// One genotype drawn by independent per-parameter sampling.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Genotype {
        self.genes().iter().map(|r| r.sample_normalized(rng)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverted_table_entry_is_canonicalized() {
        let b = ParamBounds::default();
        let r = b.range("x_adv").unwrap();
        assert_eq!((r.min, r.max), (364.0, 395.0));
    }

    #[test]
    fn extremes_decode_to_bounds() {
        let b = ParamBounds::default().with_failure_ids(7).unwrap();
        let (lo, id_lo) = b.decode(&[0.0; 11]).unwrap();
        assert_eq!(lo.x_ego, 247.0);
        assert_eq!(lo.x_adv, 364.0);
        assert_eq!((lo.l_ego, lo.tl_adv), (0, 0));
        assert_eq!(lo.h_ego, -0.08);
        assert_eq!(lo.s_adv, 20.0);
        assert_eq!(id_lo, Some(0));
        let (hi, id_hi) = b.decode(&[1.0; 11]).unwrap();
        assert_eq!(hi.x_ego, 304.0);
        assert_eq!(hi.x_adv, 395.0);
        assert_eq!((hi.l_ego, hi.tl_adv), (1, 1));
        assert_eq!(hi.h_adv, 0.08);
        assert_eq!(hi.s_ego, 29.0);
        assert_eq!(id_hi, Some(6));
    }

    #[test]
    fn midpoint_heading_and_half_up_rounding() {
        let b = ParamBounds::default();
        let mut x = vec![0.5; 10];
        let (c, _) = b.decode(&x).unwrap();
        assert!(c.h_ego.abs() < 1e-15);
        // 0.5 on a {0, 1} lane rounds up
        assert_eq!(c.l_ego, 1);
        x[2] = 0.499;
        assert_eq!(b.decode(&x).unwrap().0.l_ego, 0);
    }

    #[test]
    fn encode_errors_and_degenerate_ranges() {
        let b = ParamBounds::default();
        let mut c = ScenarioConfig::straight(250.0, 370.0, 0, 1, 25.0);
        assert!(b.encode(&c, None).is_ok());
        c.x_ego = 100.0;
        assert!(matches!(b.encode(&c, None), Err(Error::Contract(_))));
        assert!(b.encode(&ScenarioConfig::straight(250.0, 370.0, 0, 1, 25.0), Some(0)).is_err());
        let r = ParamRange::continuous(3.0, 3.0);
        assert_eq!(r.encode("p", 3.0).unwrap(), 0.0);
        assert_eq!(r.decode(0.7), 3.0);
        assert!(ParamBounds::default().with_failure_ids(0).is_err());
    }

    #[test]
    fn toml_overrides_and_validation() {
        let b = ParamBounds::from_toml(
            "x_ego = { min = 200.0, max = 210.0 }\nl_ego = { min = 0, max = 1, kind = \"integer\" }\n",
        )
        .unwrap();
        assert_eq!(b.range("x_ego").unwrap().max, 210.0);
        assert_eq!(b.range("s_ego").unwrap().max, 29.0);
        assert!(ParamBounds::from_toml("l_ego = { min = 0, max = 1.5, kind = \"integer\" }").is_err());
        assert!(ParamBounds::from_toml("speed = { min = 0, max = 1 }").is_err());
    }

    fn config_strategy() -> impl Strategy<Value = (ScenarioConfig, usize)> {
        (
            (247.0f64..=304.0, 364.0f64..=395.0, 0usize..2, 0usize..2, 0usize..2, 0usize..2),
            (-0.08f64..=0.08, -0.08f64..=0.08, 20.0f64..=29.0, 20.0f64..=29.0, 0usize..50),
        )
            .prop_map(|((x_ego, x_adv, l_ego, l_adv, tl_ego, tl_adv), (h_ego, h_adv, s_ego, s_adv, id))| {
                (
                    ScenarioConfig {
                        x_ego,
                        x_adv,
                        l_ego,
                        l_adv,
                        tl_ego,
                        tl_adv,
                        h_ego,
                        h_adv,
                        s_ego,
                        s_adv,
                    },
                    id,
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn decode_inverts_encode((c, id) in config_strategy()) {
            let b = ParamBounds::default().with_failure_ids(50).unwrap();
            let x = b.encode(&c, Some(id)).unwrap();
            prop_assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            let (d, did) = b.decode(&x).unwrap();
            prop_assert_eq!(did, Some(id));
            prop_assert_eq!((d.l_ego, d.l_adv, d.tl_ego, d.tl_adv), (c.l_ego, c.l_adv, c.tl_ego, c.tl_adv));
            for (a, e) in [(d.x_ego, c.x_ego), (d.x_adv, c.x_adv), (d.h_ego, c.h_ego),
                           (d.h_adv, c.h_adv), (d.s_ego, c.s_ego), (d.s_adv, c.s_adv)] {
                prop_assert!((a - e).abs() <= 1e-12, "{} vs {}", a, e);
            }
        }
    }
}
