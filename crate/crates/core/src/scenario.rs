//! Seeded network instances: SBS/UE placement and per-RB channel gains.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qlearning::action_space;
use crate::seed::SimRng;

/// Path-loss formulas are only evaluated from this distance on.
pub const MIN_LINK_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_mnos: usize,
    /// SBSs (and hence UEs) per MNO.
    pub sbs_per_mno: usize,
    pub num_slices: usize,
    /// Maximum number of slices each MNO may hold, one entry per MNO.
    pub capacities: Vec<usize>,
    pub cell_radius: f64,
    pub ue_max_dist: f64,
    pub wall_loss_db: f64,
    pub shadow_sigma_db: f64,
    pub noise_dbm: f64,
    pub sinr_threshold_db: f64,
    pub max_power_dbm: f64,
    pub num_power_levels: usize,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_mnos: 3,
            sbs_per_mno: 8,
            num_slices: 15,
            capacities: vec![2, 3, 4],
            cell_radius: 500.0,
            ue_max_dist: 20.0,
            wall_loss_db: 15.0,
            shadow_sigma_db: 4.0,
            noise_dbm: -120.0,
            sinr_threshold_db: 3.0,
            max_power_dbm: 10.0,
            num_power_levels: 3,
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.num_mnos == 0 {
            return fail("num_mnos must be at least 1".into());
        }
        if self.sbs_per_mno == 0 {
            return fail("sbs_per_mno must be at least 1".into());
        }
        if self.num_slices == 0 {
            return fail("num_slices must be at least 1".into());
        }
        if self.capacities.len() != self.num_mnos {
            return fail(format!(
                "expected {} capacities, got {}",
                self.num_mnos,
                self.capacities.len()
            ));
        }
        if self.num_power_levels < 2 {
            return fail("num_power_levels must be at least 2".into());
        }
        if !(self.ue_max_dist > 0.0) || !(self.cell_radius > 0.0) {
            return fail("cell_radius and ue_max_dist must be positive".into());
        }
        if !(self.shadow_sigma_db >= 0.0) || !(self.wall_loss_db >= 0.0) {
            return fail("shadow_sigma_db and wall_loss_db must be non-negative".into());
        }
        for (name, v) in [
            ("noise_dbm", self.noise_dbm),
            ("sinr_threshold_db", self.sinr_threshold_db),
            ("max_power_dbm", self.max_power_dbm),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    pub fn total_sbs(&self) -> usize {
        self.num_mnos * self.sbs_per_mno
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Direct SBS-to-own-UE path loss in dB: `37 + 20 log10(d)`.
pub fn path_loss_direct(d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(37.0 + 20.0 * d.log10())
}

/// Cross-link path loss in dB: `7 + 56 log10(d) + wall_loss_db`.
pub fn path_loss_cross(d: f64, wall_loss_db: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(7.0 + 56.0 * d.log10() + wall_loss_db)
}

/// Linear gain for a given path loss, shadowing term and fading power.
pub fn channel_gain(pl_db: f64, shadow_db: f64, fading: f64) -> f64 {
    10f64.powf(-(pl_db + shadow_db) / 10.0) * fading
}

/// Draws a linear gain with log-normal shadowing and Rayleigh fading
/// (exponentially distributed power with unit mean).
pub fn sample_channel_gain<R: Rng + ?Sized>(pl_db: f64, shadow_sigma_db: f64, rng: &mut R) -> f64 {
    let shadow = if shadow_sigma_db > 0.0 {
        Normal::new(0.0, shadow_sigma_db)
            .expect("sigma is positive")
            .sample(rng)
    } else {
        0.0
    };
    let fading: f64 = Exp1.sample(rng);
    // Exp1 can return exactly 0 with vanishing probability; gains must stay positive.
    channel_gain(pl_db, shadow, fading.max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sbs {
    pub id: usize,
    pub mno: usize,
    pub position: Point,
    /// The single UE served by this SBS.
    pub ue_position: Point,
}

/// An immutable network instance.
///
/// SBS ids are global and contiguous: MNO `k` owns ids
/// `k*F .. (k+1)*F` for topologies built by [`generate_topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    sbs: Vec<Sbs>,
    mno_sbs: Vec<Vec<usize>>,
    num_rbs: usize,
    /// `gains[(tx * n + rx) * num_rbs + rb]`
    gains: Vec<f64>,
    noise_mw: f64,
    sinr_threshold: f64,
    power_levels: Vec<f64>,
}

impl NetworkTopology {
    /// Builds a topology from explicit gains, mainly for hand-made test
    /// instances. `gain(tx, rx, rb)` is queried for every triple.
    pub fn from_gains(
        mno_sbs: Vec<Vec<usize>>,
        num_rbs: usize,
        noise_mw: f64,
        sinr_threshold: f64,
        power_levels: Vec<f64>,
        gain: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let n: usize = mno_sbs.iter().map(Vec::len).sum();
        let mut seen = vec![false; n];
        let mut sbs = Vec::with_capacity(n);
        for (k, ids) in mno_sbs.iter().enumerate() {
            for &id in ids {
                if id >= n || seen[id] {
                    return Err(Error::Config(format!(
                        "SBS ids must be a permutation of 0..{n}"
                    )));
                }
                seen[id] = true;
                sbs.push(Sbs {
                    id,
                    mno: k,
                    position: Point { x: 0.0, y: 0.0 },
                    ue_position: Point { x: 0.0, y: 0.0 },
                });
            }
        }
        sbs.sort_by_key(|s| s.id);
        if num_rbs == 0 || power_levels.is_empty() {
            return Err(Error::Config(
                "need at least one RB and one power level".into(),
            ));
        }
        let mut gains = Vec::with_capacity(n * n * num_rbs);
        for tx in 0..n {
            for rx in 0..n {
                for rb in 0..num_rbs {
                    let g = gain(tx, rx, rb);
                    if !(g > 0.0) || !g.is_finite() {
                        return Err(Error::Domain(format!(
                            "gain({tx}, {rx}, {rb}) = {g} is not positive and finite"
                        )));
                    }
                    gains.push(g);
                }
            }
        }
        Ok(Self {
            sbs,
            mno_sbs,
            num_rbs,
            gains,
            noise_mw,
            sinr_threshold,
            power_levels,
        })
    }

    pub fn num_sbs(&self) -> usize {
        self.sbs.len()
    }

    pub fn num_mnos(&self) -> usize {
        self.mno_sbs.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.num_rbs
    }

    pub fn sbs(&self) -> &[Sbs] {
        &self.sbs
    }

    pub fn sbs_of(&self, mno: usize) -> &[usize] {
        &self.mno_sbs[mno]
    }

    pub fn mno_of(&self, sbs: usize) -> usize {
        self.sbs[sbs].mno
    }

    /// Linear power gain from SBS `tx` to the UE of SBS `rx` on `rb`.
    #[inline]
    pub fn gain(&self, tx: usize, rx: usize, rb: usize) -> f64 {
        self.gains[(tx * self.sbs.len() + rx) * self.num_rbs + rb]
    }

    pub fn noise_mw(&self) -> f64 {
        self.noise_mw
    }

    /// SINR threshold on the linear scale.
    pub fn sinr_threshold(&self) -> f64 {
        self.sinr_threshold
    }

    /// Transmit power levels in mW, ascending, starting at 0.
    pub fn power_levels(&self) -> &[f64] {
        &self.power_levels
    }

    pub fn max_power_level(&self) -> f64 {
        *self.power_levels.last().expect("non-empty")
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }
}

fn uniform_in_disc<R: Rng + ?Sized>(center: Point, radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point {
        x: center.x + r * theta.cos(),
        y: center.y + r * theta.sin(),
    }
}

/// Generates a topology: SBSs uniform in the cell disc, each UE uniform in a
/// disc of `ue_max_dist` around its SBS, and independent shadowing and
/// fading for every (tx, rx, RB) triple.
pub fn generate_topology(cfg: &ScenarioConfig) -> Result<NetworkTopology> {
    cfg.validate()?;
    let mut rng = SimRng::seed_from_u64(cfg.rng_seed);
    let origin = Point { x: 0.0, y: 0.0 };
    let f = cfg.sbs_per_mno;
    let n = cfg.total_sbs();

    let mut sbs = Vec::with_capacity(n);
    let mut mno_sbs = Vec::with_capacity(cfg.num_mnos);
    for k in 0..cfg.num_mnos {
        mno_sbs.push((k * f..(k + 1) * f).collect());
        for id in k * f..(k + 1) * f {
            let position = uniform_in_disc(origin, cfg.cell_radius, &mut rng);
            let ue_position = uniform_in_disc(position, cfg.ue_max_dist, &mut rng);
            sbs.push(Sbs {
                id,
                mno: k,
                position,
                ue_position,
            });
        }
    }

    let l = cfg.num_slices;
    let mut gains = Vec::with_capacity(n * n * l);
    for tx in &sbs {
        for rx in &sbs {
            let d = tx.position.distance(&rx.ue_position).max(MIN_LINK_DISTANCE);
            let pl = if tx.id == rx.id {
                path_loss_direct(d)?
            } else {
                path_loss_cross(d, cfg.wall_loss_db)?
            };
            for _ in 0..l {
                gains.push(sample_channel_gain(pl, cfg.shadow_sigma_db, &mut rng));
            }
        }
    }

    let power_levels = action_space(dbm_to_mw(cfg.max_power_dbm), cfg.num_power_levels)?;
    Ok(NetworkTopology {
        sbs,
        mno_sbs,
        num_rbs: l,
        gains,
        noise_mw: dbm_to_mw(cfg.noise_dbm),
        sinr_threshold: db_to_linear(cfg.sinr_threshold_db),
        power_levels,
    })
}
