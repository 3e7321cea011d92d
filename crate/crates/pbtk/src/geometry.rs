//! Election maps: Jaccard distances between projects' supporter sets,
//! distance normalization, a seeded SMACOF embedding into the plane, and
//! map-datum export for plotting.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::Election;
use crate::rational::{ratio, to_f64, Rat};
use crate::rules::Outcome;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("need at least 2 supported projects, found {0}")]
    TooFewProjects(usize),
    #[error("no usable positions for any project")]
    NoPositions,
}

/// Symmetric distance matrix over a set of projects.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    /// `d[i][j]` in `[0, 1]`, zero diagonal.
    pub d: Vec<Vec<Rat>>,
    /// Projects dropped for having no supporters.
    pub excluded: Vec<String>,
}

/// Jaccard distance matrix between projects' supporter sets:
/// `|N(p1) Δ N(p2)| / |N(p1) ∪ N(p2)|`. Projects with no supporters are
/// excluded (and listed in `excluded`).
pub fn jaccard_matrix(e: &Election) -> Result<DistanceMatrix, GeometryError> {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for p in 0..e.num_projects() {
        if e.supporters(p).is_empty() {
            excluded.push(e.project(p).id.clone());
        } else {
            kept.push(p);
        }
    }
    if kept.len() < 2 {
        return Err(GeometryError::TooFewProjects(kept.len()));
    }

    let sets: Vec<BTreeSet<usize>> = kept
        .iter()
        .map(|&p| e.supporters(p).iter().map(|&(v, _)| v).collect())
        .collect();
    let n = kept.len();
    let mut d = vec![vec![Rat::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let inter = sets[i].intersection(&sets[j]).count() as i64;
            let union = sets[i].union(&sets[j]).count() as i64;
            let dist = ratio(union - inter, union);
            d[i][j] = dist.clone();
            d[j][i] = dist;
        }
    }
    Ok(DistanceMatrix {
        labels: kept.iter().map(|&p| e.project(p).id.clone()).collect(),
        d,
        excluded,
    })
}

/// Entrywise `d' = max(0, d - 1/2)`. Symmetry and the zero diagonal are
/// preserved; the result need not satisfy the triangle inequality.
pub fn normalize_distances(dm: &DistanceMatrix) -> DistanceMatrix {
    let half = ratio(1, 2);
    let mut out = dm.clone();
    for row in &mut out.d {
        for x in row.iter_mut() {
            *x = if *x > half { &*x - &half } else { Rat::zero() };
        }
    }
    out
}

/// A 2D embedding of a distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub labels: Vec<String>,
    /// Coordinates parallel to `labels`.
    pub coords: Vec<(f64, f64)>,
    /// Raw stress: sum over pairs of squared (distance - fitted distance).
    pub stress: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Set when all input distances were zero; all points sit at the origin.
    pub degenerate: bool,
}

fn raw_stress(d: &[Vec<f64>], coords: &[(f64, f64)]) -> f64 {
    let n = coords.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = coords[i].0 - coords[j].0;
            let dy = coords[i].1 - coords[j].1;
            let fitted = (dx * dx + dy * dy).sqrt();
            let diff = d[i][j] - fitted;
            s += diff * diff;
        }
    }
    s
}

/// Embed a distance matrix into the plane with SMACOF stress majorization.
///
/// Starts from a seeded uniform-random configuration in `[-0.5, 0.5]^2` and
/// applies Guttman transforms until the relative stress improvement drops
/// below `tol` or `max_iter` is reached. Stress is non-increasing across
/// iterations and the result is bit-for-bit reproducible per seed.
pub fn mds_embed(dm: &DistanceMatrix, seed: u64, max_iter: usize, tol: f64) -> Embedding {
    let n = dm.labels.len();
    let d: Vec<Vec<f64>> = dm
        .d
        .iter()
        .map(|row| row.iter().map(to_f64).collect())
        .collect();

    if d.iter().all(|row| row.iter().all(|&x| x == 0.0)) {
        return Embedding {
            labels: dm.labels.clone(),
            coords: vec![(0.0, 0.0); n],
            stress: 0.0,
            iterations: 0,
            seed,
            degenerate: true,
        };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
        .collect();

    let mut stress = raw_stress(&d, &coords);
    let mut iterations = 0;
    for _ in 0..max_iter {
        // Guttman transform: X' = (1/n) B(X) X
        let mut next = vec![(0.0f64, 0.0f64); n];
        for i in 0..n {
            let mut bx = 0.0;
            let mut by = 0.0;
            let mut diag = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let dx = coords[i].0 - coords[j].0;
                let dy = coords[i].1 - coords[j].1;
                let dist = (dx * dx + dy * dy).sqrt();
                let b = if dist > 1e-15 { d[i][j] / dist } else { 0.0 };
                diag += b;
                bx -= b * coords[j].0;
                by -= b * coords[j].1;
            }
            next[i].0 = (diag * coords[i].0 + bx) / n as f64;
            next[i].1 = (diag * coords[i].1 + by) / n as f64;
        }
        coords = next;
        iterations += 1;
        let new_stress = raw_stress(&d, &coords);
        let improvement = (stress - new_stress) / stress.max(f64::MIN_POSITIVE);
        stress = new_stress;
        if improvement < tol {
            break;
        }
    }

    Embedding {
        labels: dm.labels.clone(),
        coords,
        stress,
        iterations,
        seed,
        degenerate: false,
    }
}

/// Selection status of a project across the two compared outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Neither,
    Both,
    EsOnly,
    UgOnly,
}

/// One plottable project: position, the two half-disc radii, and its
/// selection status.
#[derive(Debug, Clone, PartialEq)]
pub struct MapDatum {
    pub project_id: String,
    pub position: (f64, f64),
    /// Proportional to sqrt(cost) so disc area tracks cost.
    pub cost_radius: f64,
    /// Proportional to sqrt(total votes received).
    pub votes_radius: f64,
    pub status: Status,
}

/// Where map positions come from.
pub enum PositionSource<'a> {
    /// Project GPS coordinates; projects without GPS are skipped.
    Gps,
    /// A previously computed embedding; projects absent from it are skipped.
    Embedding(&'a Embedding),
}

/// Build map data comparing an Equal Shares outcome with a Utilitarian
/// Greedy outcome. Every plottable project lands in exactly one status.
pub fn export_map(
    e: &Election,
    source: &PositionSource,
    w_es: &Outcome,
    w_ug: &Outcome,
) -> Result<Vec<MapDatum>, GeometryError> {
    let mut data = Vec::new();
    for p in 0..e.num_projects() {
        let project = e.project(p);
        let position = match source {
            PositionSource::Gps => match project.gps {
                Some((lat, lon)) => (lon, lat), // x east, y north
                None => continue,
            },
            PositionSource::Embedding(emb) => {
                match emb.labels.iter().position(|l| *l == project.id) {
                    Some(i) => emb.coords[i],
                    None => continue,
                }
            }
        };
        let status = match (w_es.selected.contains(&p), w_ug.selected.contains(&p)) {
            (true, true) => Status::Both,
            (true, false) => Status::EsOnly,
            (false, true) => Status::UgOnly,
            (false, false) => Status::Neither,
        };
        let votes = e.supporters(p).len() as f64;
        data.push(MapDatum {
            project_id: project.id.clone(),
            position,
            cost_radius: (project.cost as f64).sqrt(),
            votes_radius: votes.max(1.0).sqrt(),
            status,
        });
    }
    if data.is_empty() {
        return Err(GeometryError::NoPositions);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_election;
    use crate::pbformat::parse_pb;
    use crate::rational::rat;
    use crate::rules::{complete_add1, utilitarian_greedy};
    use crate::model::UtilityModel;

    const TOY: &str = include_str!("../tests/data/toy.pb");

    fn toy() -> Election {
        build_election(&parse_pb(TOY, "toy").unwrap(), None).unwrap()
    }

    fn matrix_of(rows: &[&[(i64, i64)]]) -> DistanceMatrix {
        let n = rows.len();
        DistanceMatrix {
            labels: (0..n).map(|i| format!("p{i}")).collect(),
            d: rows
                .iter()
                .map(|r| r.iter().map(|&(a, b)| ratio(a, b)).collect())
                .collect(),
            excluded: Vec::new(),
        }
    }

    #[test]
    fn jaccard_on_toy() {
        let e = toy();
        let dm = jaccard_matrix(&e).unwrap();
        assert!(dm.excluded.is_empty());
        let i4 = dm.labels.iter().position(|l| l == "4").unwrap();
        let i5 = dm.labels.iter().position(|l| l == "5").unwrap();
        assert_eq!(dm.d[i4][i5], ratio(5, 8));
        for i in 0..dm.labels.len() {
            assert_eq!(dm.d[i][i], rat(0));
            for j in 0..dm.labels.len() {
                assert_eq!(dm.d[i][j], dm.d[j][i]);
            }
        }
    }

    #[test]
    fn jaccard_extremes() {
        // two identical supporter sets, one disjoint
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 3\nnum_votes; 2\nbudget; 100\nvote_type; approval\nrule; greedy\n\
            PROJECTS\nproject_id; cost\na; 10\nb; 10\nc; 10\nVOTES\nvoter_id; vote\n\
            v1; a,b\nv2; c\n";
        let e = build_election(&parse_pb(text, "t").unwrap(), None).unwrap();
        let dm = jaccard_matrix(&e).unwrap();
        let idx = |id: &str| dm.labels.iter().position(|l| l == id).unwrap();
        assert_eq!(dm.d[idx("a")][idx("b")], rat(0));
        assert_eq!(dm.d[idx("a")][idx("c")], rat(1));
    }

    #[test]
    fn unsupported_projects_excluded() {
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 3\nnum_votes; 1\nbudget; 100\nvote_type; approval\nrule; greedy\n\
            PROJECTS\nproject_id; cost\na; 10\nb; 10\nghost; 10\nVOTES\nvoter_id; vote\nv1; a,b\n";
        let e = build_election(&parse_pb(text, "t").unwrap(), None).unwrap();
        let dm = jaccard_matrix(&e).unwrap();
        assert_eq!(dm.excluded, vec!["ghost"]);
        assert_eq!(dm.labels, vec!["a", "b"]);
    }

    #[test]
    fn too_few_projects_error() {
        let text = "META\nkey; value\ndescription; t\ncountry; t\nunit; t\ninstance; 1\n\
            num_projects; 1\nnum_votes; 1\nbudget; 100\nvote_type; approval\nrule; greedy\n\
            PROJECTS\nproject_id; cost\na; 10\nVOTES\nvoter_id; vote\nv1; a\n";
        let e = build_election(&parse_pb(text, "t").unwrap(), None).unwrap();
        assert_eq!(jaccard_matrix(&e), Err(GeometryError::TooFewProjects(1)));
    }

    #[test]
    fn normalization_clamps_at_half() {
        let dm = matrix_of(&[
            &[(0, 1), (5, 8), (3, 10)],
            &[(5, 8), (0, 1), (1, 1)],
            &[(3, 10), (1, 1), (0, 1)],
        ]);
        let norm = normalize_distances(&dm);
        assert_eq!(norm.d[0][1], ratio(1, 8));
        assert_eq!(norm.d[0][2], rat(0));
        assert_eq!(norm.d[1][2], ratio(1, 2));
        assert_eq!(norm.d[0][0], rat(0));
    }

    #[test]
    fn two_points_embed_exactly() {
        let dm = matrix_of(&[&[(0, 1), (1, 2)], &[(1, 2), (0, 1)]]);
        let emb = mds_embed(&dm, 7, 1000, 1e-12);
        let (a, b) = (emb.coords[0], emb.coords[1]);
        let dist = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
        assert!((dist - 0.5).abs() < 1e-6, "dist {dist}");
        assert!(emb.stress < 1e-12);
    }

    #[test]
    fn equilateral_triangle_embeds_exactly() {
        let dm = matrix_of(&[
            &[(0, 1), (1, 2), (1, 2)],
            &[(1, 2), (0, 1), (1, 2)],
            &[(1, 2), (1, 2), (0, 1)],
        ]);
        let emb = mds_embed(&dm, 3, 2000, 1e-14);
        assert!(emb.stress < 1e-10, "stress {}", emb.stress);
    }

    #[test]
    fn tetrahedron_has_positive_stress() {
        // 4 pairwise-equidistant points cannot embed in the plane
        let q = (1, 2);
        let z = (0, 1);
        let dm = matrix_of(&[
            &[z, q, q, q],
            &[q, z, q, q],
            &[q, q, z, q],
            &[q, q, q, z],
        ]);
        let emb = mds_embed(&dm, 11, 2000, 1e-14);
        assert!(emb.stress > 1e-4, "stress {}", emb.stress);
    }

    #[test]
    fn degenerate_matrix_flagged() {
        let dm = matrix_of(&[&[(0, 1), (0, 1)], &[(0, 1), (0, 1)]]);
        let emb = mds_embed(&dm, 1, 100, 1e-9);
        assert!(emb.degenerate);
        assert_eq!(emb.coords, vec![(0.0, 0.0); 2]);
        assert_eq!(emb.stress, 0.0);
    }

    #[test]
    fn embedding_is_seed_deterministic() {
        let e = toy();
        let dm = normalize_distances(&jaccard_matrix(&e).unwrap());
        let a = mds_embed(&dm, 42, 1000, 1e-9);
        let b = mds_embed(&dm, 42, 1000, 1e-9);
        assert_eq!(a, b);
    }

    #[test]
    fn export_map_statuses_on_toy() {
        let e = toy();
        let ug = utilitarian_greedy(&e, UtilityModel::Cost);
        let es = complete_add1(&e, UtilityModel::Cost, true);
        let dm = normalize_distances(&jaccard_matrix(&e).unwrap());
        let emb = mds_embed(&dm, 1, 500, 1e-9);
        let data = export_map(&e, &PositionSource::Embedding(&emb), &es, &ug).unwrap();
        assert_eq!(data.len(), 5);
        let status = |id: &str| data.iter().find(|d| d.project_id == id).unwrap().status;
        assert_eq!(status("1"), Status::EsOnly);
        assert_eq!(status("5"), Status::UgOnly);
        assert_eq!(status("4"), Status::Both);
        assert_eq!(status("2"), Status::Neither);
        assert_eq!(status("7"), Status::Neither);
        for d in &data {
            assert!(d.cost_radius > 0.0 && d.votes_radius > 0.0);
        }
    }

    #[test]
    fn gps_source_skips_projects_without_gps() {
        let text = TOY
            .replace(
                "project_id; cost; category",
                "project_id; cost; category; latitude; longitude",
            )
            .replace("1; 600; culture, education", "1; 600; culture, education; 49.98; 20.06")
            .replace("2; 800; sport", "2; 800; sport; ; ")
            .replace("4; 1400; culture", "4; 1400; culture; 50.00; 20.00")
            .replace("5; 1000; health, sport", "5; 1000; health, sport; 49.99; 20.03")
            .replace("7; 1200; education", "7; 1200; education; 50.01; 20.01");
        let e = build_election(&parse_pb(&text, "gps").unwrap(), None).unwrap();
        let ug = utilitarian_greedy(&e, UtilityModel::Cost);
        let es = complete_add1(&e, UtilityModel::Cost, true);
        let data = export_map(&e, &PositionSource::Gps, &es, &ug).unwrap();
        assert_eq!(data.len(), 4); // project 2 has no GPS
        assert!(!data.iter().any(|d| d.project_id == "2"));
    }
}
