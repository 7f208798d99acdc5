//! Survey paths and formation geometry.
//!
//! Paths are parametrized by arc length, so the path coordinate doubles as
//! distance traveled and its time derivative as speed over ground. Formations
//! are fixed world-frame offsets from the path point: every agent tracks the
//! same path coordinate and sits on its own slot around it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arc-length parametrized survey path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathKind {
    /// Boustrophedon sweep in the horizontal plane: straight legs of length
    /// `leg` joined by half-circle turns of radius `turn_radius`. Each full
    /// period advances the sweep by four turn radii.
    Lawnmower { leg: f64, turn_radius: f64 },
    /// Ascending circular helix of radius `radius` gaining `climb_per_rev`
    /// meters of depth change per revolution.
    Helix { radius: f64, climb_per_rev: f64 },
}

impl PathKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PathKind::Lawnmower { leg, turn_radius } => {
                if !(leg.is_finite() && leg > 0.0) {
                    return Err(Error::Config(format!("leg must be > 0, got {leg}")));
                }
                if !(turn_radius.is_finite() && turn_radius > 0.0) {
                    return Err(Error::Config(format!(
                        "turn_radius must be > 0, got {turn_radius}"
                    )));
                }
            }
            PathKind::Helix { radius, climb_per_rev } => {
                if !(radius.is_finite() && radius > 0.0) {
                    return Err(Error::Config(format!("radius must be > 0, got {radius}")));
                }
                if !(climb_per_rev.is_finite() && climb_per_rev >= 0.0) {
                    return Err(Error::Config(format!(
                        "climb_per_rev must be >= 0, got {climb_per_rev}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// World position at path coordinate `s` (meters of arc length). Defined
    /// for all real `s`; negative values extend backwards along the path.
    pub fn position(&self, s: f64) -> [f64; 3] {
        match *self {
            PathKind::Lawnmower { leg, turn_radius: r } => {
                let period = 2.0 * leg + 2.0 * std::f64::consts::PI * r;
                let laps = (s / period).floor();
                let y0 = 4.0 * r * laps;
                let u = s - laps * period;
                let pi = std::f64::consts::PI;
                if u < leg {
                    [u, y0, 0.0]
                } else if u < leg + pi * r {
                    let phi = (u - leg) / r;
                    [leg + r * phi.sin(), y0 + r * (1.0 - phi.cos()), 0.0]
                } else if u < 2.0 * leg + pi * r {
                    [leg - (u - leg - pi * r), y0 + 2.0 * r, 0.0]
                } else {
                    let phi = (u - 2.0 * leg - pi * r) / r;
                    [-r * phi.sin(), y0 + 2.0 * r + r * (1.0 - phi.cos()), 0.0]
                }
            }
            PathKind::Helix { radius, climb_per_rev } => {
                let circ = 2.0 * std::f64::consts::PI * radius;
                let rev_len = (circ * circ + climb_per_rev * climb_per_rev).sqrt();
                let theta = 2.0 * std::f64::consts::PI * s / rev_len;
                [
                    radius * theta.cos(),
                    radius * theta.sin(),
                    climb_per_rev * s / rev_len,
                ]
            }
        }
    }
}

/// Where each agent sits relative to the shared path point, plus its offset
/// along the path coordinate. Both vectors are indexed by agent id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    /// World-frame position offsets, one per agent.
    pub slots: Vec<[f64; 3]>,
    /// Along-path coordinate offsets, one per agent.
    pub sigma_offsets: Vec<f64>,
}

impl FormationSpec {
    /// Line abreast across the track: `count` agents spread evenly over
    /// `[-half_width, half_width]` in cross-track y.
    pub fn line(count: usize, half_width: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::Argument(format!(
                "line formation needs at least 2 agents, got {count}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Argument(format!(
                "half_width must be > 0, got {half_width}"
            )));
        }
        let slots = (0..count)
            .map(|i| {
                let y = half_width * (2.0 * i as f64 / (count - 1) as f64 - 1.0);
                [0.0, y, 0.0]
            })
            .collect();
        Ok(Self { slots, sigma_offsets: vec![0.0; count] })
    }

    /// Regular octahedron of the given edge length centered on the path
    /// point: six agents on the coordinate axes at the circumradius
    /// `edge / sqrt(2)`.
    pub fn octahedron(edge: f64) -> Result<Self> {
        if !(edge.is_finite() && edge > 0.0) {
            return Err(Error::Argument(format!("edge must be > 0, got {edge}")));
        }
        let a = edge / (2.0f64).sqrt();
        let slots = vec![
            [a, 0.0, 0.0],
            [-a, 0.0, 0.0],
            [0.0, a, 0.0],
            [0.0, -a, 0.0],
            [0.0, 0.0, a],
            [0.0, 0.0, -a],
        ];
        Ok(Self { slots, sigma_offsets: vec![0.0; 6] })
    }

    pub fn fleet_size(&self) -> usize {
        self.slots.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.len() < 2 {
            return Err(Error::Config(format!(
                "formation needs at least 2 agents, got {}",
                self.slots.len()
            )));
        }
        if self.sigma_offsets.len() != self.slots.len() {
            return Err(Error::Config(format!(
                "{} slots but {} path offsets",
                self.slots.len(),
                self.sigma_offsets.len()
            )));
        }
        for (i, s) in self.slots.iter().enumerate() {
            if s.iter().any(|c| !c.is_finite()) {
                return Err(Error::Config(format!("slot {i} is not finite")));
            }
        }
        if self.sigma_offsets.iter().any(|o| !o.is_finite()) {
            return Err(Error::Config("path offsets must be finite".into()));
        }
        Ok(())
    }

    /// World-frame target of `agent` when the formation center sits at path
    /// coordinate `s`.
    pub fn target(&self, path: &PathKind, s: f64, agent: usize) -> Result<[f64; 3]> {
        let slot = self
            .slots
            .get(agent)
            .ok_or_else(|| Error::Id(format!("agent {agent} not in formation")))?;
        let off = self.sigma_offsets[agent];
        let p = path.position(s + off);
        Ok([p[0] + slot[0], p[1] + slot[1], p[2] + slot[2]])
    }
}

/// Stock shallow-survey scenario: boustrophedon sweep with four vehicles
/// line abreast.
pub fn lawnmower_line_defaults() -> (PathKind, FormationSpec) {
    (
        PathKind::Lawnmower { leg: 75.0, turn_radius: 15.0 },
        FormationSpec::line(4, 10.0).unwrap(),
    )
}

/// Stock water-column scenario: ascending helix with six vehicles in an
/// octahedron.
pub fn helix_octahedron_defaults() -> (PathKind, FormationSpec) {
    (
        PathKind::Helix { radius: 20.0, climb_per_rev: 200.0 },
        FormationSpec::octahedron(10.0).unwrap(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(a: [f64; 3], b: [f64; 3]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    #[test]
    fn paths_are_unit_speed() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let paths = [
            PathKind::Lawnmower { leg: 75.0, turn_radius: 15.0 },
            PathKind::Helix { radius: 20.0, climb_per_rev: 200.0 },
        ];
        let h = 1e-5;
        for path in paths {
            for _ in 0..500 {
                let s = rng.gen_range(0.0..600.0);
                let speed = norm(path.position(s + h), path.position(s - h)) / (2.0 * h);
                assert!((speed - 1.0).abs() < 1e-4, "speed {speed} at s = {s}");
            }
        }
    }

    #[test]
    fn paths_are_continuous_across_segment_joins() {
        let l = 75.0;
        let r = 15.0;
        let path = PathKind::Lawnmower { leg: l, turn_radius: r };
        let pi = std::f64::consts::PI;
        let period = 2.0 * l + 2.0 * pi * r;
        let joins = [l, l + pi * r, 2.0 * l + pi * r, period, period + l];
        for s in joins {
            let gap = norm(path.position(s - 1e-9), path.position(s + 1e-9));
            assert!(gap < 1e-6, "gap {gap} at join {s}");
        }
    }

    #[test]
    fn lawnmower_advances_one_sweep_per_period() {
        let l = 75.0;
        let r = 15.0;
        let path = PathKind::Lawnmower { leg: l, turn_radius: r };
        let period = 2.0 * l + 2.0 * std::f64::consts::PI * r;
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..200 {
            let s = rng.gen_range(0.0..period);
            let a = path.position(s);
            let b = path.position(s + period);
            assert!((b[0] - a[0]).abs() < 1e-9);
            assert!((b[1] - (a[1] + 4.0 * r)).abs() < 1e-9);
        }
        // the sweep never leaves the corridor around the legs
        for i in 0..2000 {
            let p = path.position(i as f64 * 0.37);
            assert!(p[0] >= -r - 1e-9 && p[0] <= l + r + 1e-9);
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn helix_keeps_its_radius_and_climb_rate() {
        let radius = 20.0;
        let climb = 200.0;
        let path = PathKind::Helix { radius, climb_per_rev: climb };
        let circ = 2.0 * std::f64::consts::PI * radius;
        let rev_len = (circ * circ + climb * climb).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let s = rng.gen_range(0.0..1000.0);
            let p = path.position(s);
            let rad = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((rad - radius).abs() < 1e-9);
            let q = path.position(s + rev_len);
            assert!((q[0] - p[0]).abs() < 1e-6);
            assert!((q[1] - p[1]).abs() < 1e-6);
            assert!((q[2] - (p[2] + climb)).abs() < 1e-6);
        }
    }

    #[test]
    fn line_formation_is_symmetric_and_evenly_spaced() {
        let f = FormationSpec::line(4, 10.0).unwrap();
        let ys: Vec<f64> = f.slots.iter().map(|s| s[1]).collect();
        assert!((ys[0] + 10.0).abs() < 1e-12);
        assert!((ys[3] - 10.0).abs() < 1e-12);
        assert!((ys[1] + 10.0 / 3.0).abs() < 1e-12);
        assert!((ys[2] - 10.0 / 3.0).abs() < 1e-12);
        assert!(f.validate().is_ok());
    }

    #[test]
    fn octahedron_has_twelve_equal_edges() {
        let edge = 10.0;
        let f = FormationSpec::octahedron(edge).unwrap();
        let mut edges = 0;
        for i in 0..6 {
            for j in i + 1..6 {
                let d = norm(f.slots[i], f.slots[j]);
                // antipodal pairs are the long diagonals, everything else
                // is an edge
                if (d - edge).abs() < 1e-9 {
                    edges += 1;
                } else {
                    assert!((d - edge * (2.0f64).sqrt()).abs() < 1e-9);
                }
            }
        }
        assert_eq!(edges, 12);
    }

    #[test]
    fn formation_target_offsets_the_path_point() {
        let (path, formation) = lawnmower_line_defaults();
        let s = 42.0;
        let center = path.position(s);
        for agent in 0..4 {
            let t = formation.target(&path, s, agent).unwrap();
            assert_eq!(t[0], center[0] + formation.slots[agent][0]);
            assert_eq!(t[1], center[1] + formation.slots[agent][1]);
        }
        assert!(matches!(
            formation.target(&path, s, 9),
            Err(Error::Id(_))
        ));
    }

    #[test]
    fn sigma_offsets_shift_along_the_path() {
        let (path, mut formation) = lawnmower_line_defaults();
        formation.sigma_offsets[2] = 5.0;
        let t = formation.target(&path, 10.0, 2).unwrap();
        let want = path.position(15.0);
        assert_eq!(t[0], want[0]);
        assert!((t[1] - (want[1] + formation.slots[2][1])).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(PathKind::Lawnmower { leg: 0.0, turn_radius: 15.0 }.validate().is_err());
        assert!(PathKind::Helix { radius: -1.0, climb_per_rev: 0.0 }.validate().is_err());
        assert!(FormationSpec::line(1, 10.0).is_err());
        assert!(FormationSpec::octahedron(0.0).is_err());
        let mut f = FormationSpec::line(4, 10.0).unwrap();
        f.sigma_offsets.pop();
        assert!(f.validate().is_err());
    }
}
