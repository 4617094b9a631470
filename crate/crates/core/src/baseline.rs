//! Conventional STAR-RIS benchmark: elements fixed at the centers of an
//! `M̂`-way partition of the same aperture.

use serde::{Deserialize, Serialize};

use crate::channel::{channel_at_indices, ChannelRealization};
use crate::error::{Error, Result};
use crate::geometry::{partition_surface, Placement, PresetDensity, SurfaceGeometry};
use crate::rate::{evaluate_channels, RateReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Element count of the conventional surface.
    pub m_hat: usize,
}

/// Subarea centers of the conventional surface.
pub fn star_ris_placement(geom: &SurfaceGeometry, cfg: &BaselineConfig) -> Result<Placement> {
    if cfg.m_hat == 0 {
        return Err(Error::Config("baseline needs at least one element".into()));
    }
    let layout = partition_surface(
        geom.aperture(),
        cfg.m_hat,
        PresetDensity::square(1),
        geom.min_spacing(),
        geom.wavelength(),
    )?;
    (0..cfg.m_hat)
        .map(|m| layout.subarea_bounds(m).map(|r| r.center()))
        .collect::<Result<Vec<_>>>()
        .map(Placement::new)
}

/// Lattice points the fixed elements read their channels from.
pub fn baseline_indices(geom: &SurfaceGeometry, cfg: &BaselineConfig) -> Result<Vec<usize>> {
    Ok(star_ris_placement(geom, cfg)?
        .positions
        .iter()
        .map(|p| geom.nearest_preset(p))
        .collect())
}

/// Rates of the fixed surface with optimal phases and split.
pub fn evaluate_baseline(
    realization: &ChannelRealization,
    geom: &SurfaceGeometry,
    cfg: &BaselineConfig,
    power: f64,
    noise: f64,
) -> Result<RateReport> {
    if realization.len() != geom.num_presets() {
        return Err(Error::LengthMismatch {
            expected: geom.num_presets(),
            actual: realization.len(),
        });
    }
    let channels = channel_at_indices(realization, &baseline_indices(geom, cfg)?)?;
    evaluate_channels(&channels, power, noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{ChannelModel, ChannelParams, LinkParams};
    use crate::geometry::{Aperture, Point};
    use crate::pso::{brute_force_oracle, ORACLE_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LAMBDA: f64 = 0.0857;

    fn geom(m: usize, n: usize) -> SurfaceGeometry {
        partition_surface(
            Aperture::new(2.0, 2.0),
            m,
            PresetDensity::square(n),
            LAMBDA / 2.0,
            LAMBDA,
        )
        .unwrap()
    }

    fn realization(g: &SurfaceGeometry, seed: u64) -> ChannelRealization {
        let link = |d: f64, az: f64| LinkParams {
            rician_k: 5.0,
            distance: d,
            path_loss_exponent: 2.5,
            azimuth: az,
            elevation: 0.9,
        };
        let p = ChannelParams {
            bs_departure: 0.2,
            incident: link(100.0, 0.4),
            reflect: link(200.0, 1.9),
            transmit: link(200.0, 2.8),
        };
        ChannelModel::new(g.clone())
            .unwrap()
            .synthesize(&p, &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    }

    #[test]
    fn centers_of_four_way_split() {
        let p = star_ris_placement(&geom(4, 3), &BaselineConfig { m_hat: 4 }).unwrap();
        assert_eq!(
            p.positions,
            vec![
                Point::new(0.5, 0.5),
                Point::new(1.5, 0.5),
                Point::new(0.5, 1.5),
                Point::new(1.5, 1.5)
            ]
        );
        assert_eq!(p.spacing_violations(LAMBDA / 2.0), 0);
    }

    #[test]
    fn single_element_sits_at_center() {
        let p = star_ris_placement(&geom(4, 3), &BaselineConfig { m_hat: 1 }).unwrap();
        assert_eq!(p.positions, vec![Point::new(1.0, 1.0)]);
    }

    #[test]
    fn invalid_count_rejected() {
        assert!(star_ris_placement(&geom(4, 3), &BaselineConfig { m_hat: 0 }).is_err());
        assert!(star_ris_placement(&geom(4, 3), &BaselineConfig { m_hat: 3 }).is_err());
    }

    #[test]
    fn centers_snap_into_own_subarea() {
        let g = geom(9, 3);
        let idx = baseline_indices(&g, &BaselineConfig { m_hat: 9 }).unwrap();
        for (m, &i) in idx.iter().enumerate() {
            assert_eq!(g.subarea_of_preset(i), m);
        }
    }

    #[test]
    fn baseline_bounded_by_oracle() {
        let g = geom(4, 3);
        let cfg = BaselineConfig { m_hat: 4 };
        for seed in 0..5 {
            let h = realization(&g, seed);
            let base = evaluate_baseline(&h, &g, &cfg, 10.0, 1e-12).unwrap();
            let o = brute_force_oracle(&h, &g, 10.0, 1e-12, ORACLE_CAP).unwrap();
            assert!(base.effective <= o.report.effective);
            assert!(base.effective > 0.0);
        }
    }

    #[test]
    fn baseline_is_deterministic_given_realization() {
        let g = geom(4, 4);
        let h = realization(&g, 1);
        let cfg = BaselineConfig { m_hat: 4 };
        assert_eq!(
            evaluate_baseline(&h, &g, &cfg, 10.0, 1e-12).unwrap(),
            evaluate_baseline(&h, &g, &cfg, 10.0, 1e-12).unwrap()
        );
    }
}
