//! Images, locations and the synthetic street-view benchmark.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{normalize_in_place, Matrix};

/// Mean Earth radius used by the equirectangular approximation, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Group members farther than this from the first member trigger a warning.
pub const GROUP_SPREAD_WARN_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GeoPosition {
    LatLon { lat: f64, lon: f64 },
    Planar { x: f64, y: f64 },
}

impl GeoPosition {
    pub fn lat_lon(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::validation(format!(
                "latitude/longitude out of range: ({lat}, {lon})"
            )));
        }
        Ok(GeoPosition::LatLon { lat, lon })
    }

    pub fn planar(x: f64, y: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::validation(format!("non-finite position ({x}, {y})")));
        }
        Ok(GeoPosition::Planar { x, y })
    }

    pub fn is_lat_lon(&self) -> bool {
        matches!(self, GeoPosition::LatLon { .. })
    }

    /// The two stored coordinates, in file order.
    pub fn coords(&self) -> (f64, f64) {
        match *self {
            GeoPosition::LatLon { lat, lon } => (lat, lon),
            GeoPosition::Planar { x, y } => (x, y),
        }
    }
}

/// Distance in meters. Planar positions use the Euclidean distance; lat/lon
/// positions use the equirectangular approximation
/// `R·√(Δφ² + (cos φ_m · Δλ)²)`.
pub fn geo_distance(a: &GeoPosition, b: &GeoPosition) -> Result<f64> {
    match (*a, *b) {
        (GeoPosition::Planar { x: x1, y: y1 }, GeoPosition::Planar { x: x2, y: y2 }) => {
            Ok((x1 - x2).hypot(y1 - y2))
        }
        (
            GeoPosition::LatLon { lat: la1, lon: lo1 },
            GeoPosition::LatLon { lat: la2, lon: lo2 },
        ) => {
            let (p1, p2) = (la1.to_radians(), la2.to_radians());
            let dphi = p2 - p1;
            let dlambda = (lo2 - lo1).to_radians();
            let x = ((p1 + p2) / 2.0).cos() * dlambda;
            Ok(EARTH_RADIUS_M * (dphi * dphi + x * x).sqrt())
        }
        _ => Err(Error::validation(
            "cannot measure distance between lat/lon and planar positions",
        )),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub location_id: String,
    pub position: GeoPosition,
    pub descriptor: Vec<f64>,
}

/// All views taken at one location. Member order is the input order.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationGroup {
    pub location_id: String,
    pub position: GeoPosition,
    pub members: Vec<ImageRecord>,
}

impl LocationGroup {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// `d × n` matrix, one member descriptor per column.
    pub fn matrix(&self) -> Matrix {
        let cols: Vec<&[f64]> = self.members.iter().map(|m| m.descriptor.as_slice()).collect();
        Matrix::from_columns(&cols).expect("group descriptors validated at construction")
    }

    /// Matrix of the selected members, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<Matrix> {
        let cols = indices
            .iter()
            .map(|&i| {
                self.members
                    .get(i)
                    .map(|m| m.descriptor.as_slice())
                    .ok_or_else(|| Error::validation(format!("member index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_columns(&cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Dataset,
    Query,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Dataset => "dataset",
            Side::Query => "query",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub groups: Vec<LocationGroup>,
    pub d: usize,
    pub side: Side,
}

impl Corpus {
    pub fn num_locations(&self) -> usize {
        self.groups.len()
    }

    pub fn num_images(&self) -> usize {
        self.groups.iter().map(LocationGroup::len).sum()
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.groups.iter().flat_map(|g| g.members.iter())
    }

    pub fn group(&self, location_id: &str) -> Option<&LocationGroup> {
        self.groups.iter().find(|g| g.location_id == location_id)
    }

    /// Flattens back into records, group by group.
    pub fn records(&self) -> Vec<ImageRecord> {
        self.images().cloned().collect()
    }

    /// Applies `f` to every descriptor, e.g. a PCA projection.
    pub fn map_descriptors<F>(&self, mut f: F) -> Result<Corpus>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut records = Vec::with_capacity(self.num_images());
        for r in self.images() {
            records.push(ImageRecord {
                descriptor: f(&r.descriptor)?,
                ..r.clone()
            });
        }
        Ok(group_by_location(records, self.side)?.0)
    }
}

/// A group whose members are not all at the group position.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadWarning {
    pub location_id: String,
    pub max_spread_m: f64,
}

/// Partitions records into one group per location id.
///
/// Groups appear in order of first occurrence and keep member input order. A
/// group takes its first member's position; members farther than
/// [`GROUP_SPREAD_WARN_M`] from it produce a [`SpreadWarning`].
pub fn group_by_location(
    records: Vec<ImageRecord>,
    side: Side,
) -> Result<(Corpus, Vec<SpreadWarning>)> {
    let Some(first) = records.first() else {
        return Err(Error::validation("empty corpus"));
    };
    let d = first.descriptor.len();
    if d == 0 {
        return Err(Error::validation("zero-dimensional descriptors"));
    }
    let mut seen_images = HashSet::with_capacity(records.len());
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<LocationGroup> = Vec::new();
    for r in records {
        if r.descriptor.len() != d {
            return Err(Error::validation(format!(
                "image {} has dimension {}, expected {d}",
                r.image_id,
                r.descriptor.len()
            )));
        }
        if r.image_id.is_empty() || r.location_id.is_empty() {
            return Err(Error::validation("empty image or location id"));
        }
        if r.descriptor.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "image {} has a non-finite descriptor",
                r.image_id
            )));
        }
        if !seen_images.insert(r.image_id.clone()) {
            return Err(Error::validation(format!("duplicate image id {}", r.image_id)));
        }
        match index.get(&r.location_id) {
            Some(&g) => groups[g].members.push(r),
            None => {
                index.insert(r.location_id.clone(), groups.len());
                groups.push(LocationGroup {
                    location_id: r.location_id.clone(),
                    position: r.position,
                    members: vec![r],
                });
            }
        }
    }
    let mut warnings = Vec::new();
    for g in &groups {
        let mut spread = 0.0f64;
        for m in &g.members {
            spread = spread.max(geo_distance(&g.position, &m.position)?);
        }
        if spread > GROUP_SPREAD_WARN_M {
            log::warn!("location {} members spread over {spread:.2} m", g.location_id);
            warnings.push(SpreadWarning {
                location_id: g.location_id.clone(),
                max_spread_m: spread,
            });
        }
    }
    Ok((Corpus { groups, d, side }, warnings))
}

/// Parameters of the synthetic street-view benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_locations: usize,
    pub views_per_location: usize,
    pub d: usize,
    /// Norm of the isotropic noise added to each unit view descriptor.
    pub scene_noise: f64,
    /// Weight of the next latent direction in each view, in `[0, 1]`.
    pub view_overlap: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_locations: 200,
            views_per_location: 8,
            d: 64,
            scene_noise: 1.2,
            view_overlap: 0.5,
            seed: 7,
        }
    }
}

/// Spacing of the synthetic location grid, in meters.
pub const SYNTH_GRID_SPACING_M: f64 = 60.0;
/// Maximum offset of a synthetic query location from its dataset twin.
pub const SYNTH_QUERY_JITTER_M: f64 = 3.0;

/// Generates a dataset corpus and a query corpus with one query location per
/// dataset location.
///
/// Locations sit on a planar grid. Each owns a chain of `views + 1` random
/// latent directions; view `j` mixes directions `j` and `j+1` (so views are
/// linearly independent for any overlap), is
/// unit-normalized, perturbed by Gaussian noise of norm about `scene_noise`,
/// and normalized again. Query views reuse the same mixes with fresh noise.
pub fn synth_benchmark(cfg: &SynthConfig) -> Result<(Corpus, Corpus)> {
    if cfg.num_locations == 0 || cfg.views_per_location == 0 || cfg.d == 0 {
        return Err(Error::validation("synthetic counts must all be at least 1"));
    }
    if !(cfg.scene_noise >= 0.0 && cfg.scene_noise.is_finite()) {
        return Err(Error::validation("scene_noise must be finite and nonnegative"));
    }
    if !(0.0..=1.0).contains(&cfg.view_overlap) {
        return Err(Error::validation("view_overlap must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let grid_cols = (cfg.num_locations as f64).sqrt().ceil() as usize;
    let v = cfg.views_per_location;
    let noise_scale = cfg.scene_noise / (cfg.d as f64).sqrt();

    let mut mixes: Vec<Vec<Vec<f64>>> = Vec::with_capacity(cfg.num_locations);
    for _ in 0..cfg.num_locations {
        let latent: Vec<Vec<f64>> = (0..=v).map(|_| gaussian_unit(&mut rng, cfg.d)).collect();
        let views = (0..v)
            .map(|j| {
                let (a, b) = (&latent[j], &latent[j + 1]);
                let mut m: Vec<f64> = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (1.0 - cfg.view_overlap) * x + cfg.view_overlap * y)
                    .collect();
                normalize_in_place(&mut m);
                m
            })
            .collect();
        mixes.push(views);
    }

    let view = |rng: &mut ChaCha8Rng, mix: &[f64]| -> Vec<f64> {
        let mut out: Vec<f64> = mix
            .iter()
            .map(|m| m + noise_scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        normalize_in_place(&mut out);
        out
    };

    let mut dataset = Vec::with_capacity(cfg.num_locations * v);
    let mut positions = Vec::with_capacity(cfg.num_locations);
    for (i, loc) in mixes.iter().enumerate() {
        let pos = GeoPosition::Planar {
            x: SYNTH_GRID_SPACING_M * (i % grid_cols) as f64,
            y: SYNTH_GRID_SPACING_M * (i / grid_cols) as f64,
        };
        positions.push(pos);
        for (j, mix) in loc.iter().enumerate() {
            dataset.push(ImageRecord {
                image_id: format!("db{i:05}_v{j:02}"),
                location_id: format!("db{i:05}"),
                position: pos,
                descriptor: view(&mut rng, mix),
            });
        }
    }
    let mut queries = Vec::with_capacity(cfg.num_locations * v);
    for (i, loc) in mixes.iter().enumerate() {
        let (x, y) = positions[i].coords();
        let r = SYNTH_QUERY_JITTER_M * rng.random::<f64>();
        let theta = std::f64::consts::TAU * rng.random::<f64>();
        let pos = GeoPosition::Planar {
            x: x + r * theta.cos(),
            y: y + r * theta.sin(),
        };
        for (j, mix) in loc.iter().enumerate() {
            queries.push(ImageRecord {
                image_id: format!("q{i:05}_v{j:02}"),
                location_id: format!("q{i:05}"),
                position: pos,
                descriptor: view(&mut rng, mix),
            });
        }
    }
    Ok((
        group_by_location(dataset, Side::Dataset)?.0,
        group_by_location(queries, Side::Query)?.0,
    ))
}

fn gaussian_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    normalize_in_place(&mut v);
    v
}
