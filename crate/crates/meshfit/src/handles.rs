//! Handle definitions on the template mesh: 10 joint vertex groups, 200
//! normal-constrained anchors, and the metadata file that names them.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmeans;
use crate::mesh::TriMesh;

/// The 10 body joints used as deformation control points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointName {
    Head,
    Waist,
    ShoulderL,
    ShoulderR,
    ElbowL,
    ElbowR,
    KneeL,
    KneeR,
    AnkleL,
    AnkleR,
}

impl JointName {
    pub const ALL: [JointName; 10] = [
        JointName::Head,
        JointName::Waist,
        JointName::ShoulderL,
        JointName::ShoulderR,
        JointName::ElbowL,
        JointName::ElbowR,
        JointName::KneeL,
        JointName::KneeR,
        JointName::AnkleL,
        JointName::AnkleR,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            JointName::Head => "head",
            JointName::Waist => "waist",
            JointName::ShoulderL => "shoulder_l",
            JointName::ShoulderR => "shoulder_r",
            JointName::ElbowL => "elbow_l",
            JointName::ElbowR => "elbow_r",
            JointName::KneeL => "knee_l",
            JointName::KneeR => "knee_r",
            JointName::AnkleL => "ankle_l",
            JointName::AnkleR => "ankle_r",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&j| j == self).unwrap()
    }

    pub fn from_str(name: &str) -> Result<JointName> {
        Self::ALL
            .iter()
            .copied()
            .find(|j| j.as_str() == name)
            .ok_or_else(|| Error::UnknownJoint {
                name: name.to_string(),
            })
    }
}

impl fmt::Display for JointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vertices around one joint; the joint position is their mean.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointHandleGroup {
    pub joint_name: JointName,
    pub vertex_indices: Vec<usize>,
}

/// One silhouette anchor: a vertex allowed to move only along its normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorHandle {
    pub vertex_index: usize,
    /// Unit vertex normal at the time the anchor was (re)evaluated.
    pub constraint_normal: Vector3<f64>,
    pub active: bool,
    /// Signed movement along `constraint_normal`, meters. Zero and
    /// `active = false` for disabled anchors.
    pub movement: f64,
}

/// Anchor movements are capped at the silhouette search radius.
pub const ANCHOR_SEARCH_RADIUS_M: f64 = 0.1;

/// Template handle metadata: the 10 joint groups plus the vertex set
/// excluded from anchor selection (face, fingers, toes).
#[derive(Debug, Clone)]
pub struct TemplateMetadata {
    pub groups: Vec<JointHandleGroup>,
    pub excluded: BTreeSet<usize>,
}

#[derive(Serialize, Deserialize)]
struct MetadataFile {
    joints: std::collections::BTreeMap<String, Vec<usize>>,
    excluded: Vec<usize>,
}

/// Load joint groups and the excluded-vertex set from a metadata JSON file,
/// checking the 10-group, disjointness, and index-range invariants against
/// a template with `vertex_count` vertices.
pub fn load_template_metadata(
    path: impl AsRef<Path>,
    vertex_count: usize,
) -> Result<TemplateMetadata> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: MetadataFile = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    template_metadata_from_parts(file.joints, file.excluded, vertex_count)
}

fn template_metadata_from_parts(
    joints: std::collections::BTreeMap<String, Vec<usize>>,
    excluded: Vec<usize>,
    vertex_count: usize,
) -> Result<TemplateMetadata> {
    let mut groups = Vec::with_capacity(10);
    let mut seen = BTreeSet::new();
    for name in JointName::ALL {
        let indices = joints
            .get(name.as_str())
            .ok_or_else(|| Error::MissingJoint {
                name: name.as_str().to_string(),
            })?
            .clone();
        if indices.is_empty() {
            return Err(Error::EmptyJointGroup {
                name: name.as_str().to_string(),
            });
        }
        for &i in &indices {
            if i >= vertex_count {
                return Err(Error::VertexIndexOutOfRange {
                    index: i,
                    vertex_count,
                });
            }
            if !seen.insert(i) {
                return Err(Error::DuplicateGroupVertex { index: i });
            }
        }
        groups.push(JointHandleGroup {
            joint_name: name,
            vertex_indices: indices,
        });
    }
    for name in joints.keys() {
        JointName::from_str(name)?;
    }
    let excluded: BTreeSet<usize> = excluded.into_iter().collect();
    if let Some(&bad) = excluded.iter().find(|&&i| i >= vertex_count) {
        return Err(Error::VertexIndexOutOfRange {
            index: bad,
            vertex_count,
        });
    }
    Ok(TemplateMetadata { groups, excluded })
}

/// Save metadata in the same JSON schema `load_template_metadata` reads.
pub fn save_template_metadata(meta: &TemplateMetadata, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = MetadataFile {
        joints: meta
            .groups
            .iter()
            .map(|g| (g.joint_name.as_str().to_string(), g.vertex_indices.clone()))
            .collect(),
        excluded: meta.excluded.iter().copied().collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("serializable");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Build metadata for an arbitrary template: each joint group is the
/// `group_size` vertices nearest its seed point, groups kept disjoint in
/// seed order; the excluded set is every vertex within `excluded_radius` of
/// an exclusion seed.
pub fn make_template_metadata(
    template: &TriMesh,
    joint_seeds: &[(JointName, Point3<f64>)],
    group_size: usize,
    exclusion_seeds: &[Point3<f64>],
    exclusion_radius: f64,
) -> Result<TemplateMetadata> {
    let mut taken = vec![false; template.vertex_count()];
    let mut by_name = std::collections::BTreeMap::new();
    for (name, seed) in joint_seeds {
        let mut order: Vec<usize> = (0..template.vertex_count()).filter(|&i| !taken[i]).collect();
        order.sort_by(|&a, &b| {
            let da = (template.vertices()[a] - seed).norm();
            let db = (template.vertices()[b] - seed).norm();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        let chosen: Vec<usize> = order.into_iter().take(group_size).collect();
        for &i in &chosen {
            taken[i] = true;
        }
        by_name.insert(name.as_str().to_string(), chosen);
    }
    let excluded: Vec<usize> = (0..template.vertex_count())
        .filter(|&i| {
            exclusion_seeds
                .iter()
                .any(|s| (template.vertices()[i] - s).norm() <= exclusion_radius)
        })
        .collect();
    template_metadata_from_parts(by_name, excluded, template.vertex_count())
}

/// Mean position of each group's member vertices, in `JointName::ALL` order
/// of the provided groups.
pub fn joint_positions(mesh: &TriMesh, groups: &[JointHandleGroup]) -> Result<Vec<Point3<f64>>> {
    groups
        .iter()
        .map(|g| {
            if g.vertex_indices.is_empty() {
                return Err(Error::EmptyJointGroup {
                    name: g.joint_name.as_str().to_string(),
                });
            }
            let mut acc = Vector3::zeros();
            for &i in &g.vertex_indices {
                if i >= mesh.vertex_count() {
                    return Err(Error::VertexIndexOutOfRange {
                        index: i,
                        vertex_count: mesh.vertex_count(),
                    });
                }
                acc += mesh.vertices()[i].coords;
            }
            Ok(Point3::from(acc / g.vertex_indices.len() as f64))
        })
        .collect()
}

/// Select `k` anchor vertices by k-means over 6D `[position; normal]`
/// features of the non-excluded vertices. Each cluster contributes the
/// non-excluded vertex nearest its center (ties to the lowest index;
/// duplicates fall back to the next-nearest unused vertex). Deterministic
/// for a given seed.
pub fn select_anchor_handles(
    template: &TriMesh,
    excluded: &BTreeSet<usize>,
    k: usize,
    seed: u64,
) -> Result<Vec<AnchorHandle>> {
    let candidates: Vec<usize> = (0..template.vertex_count())
        .filter(|i| !excluded.contains(i))
        .collect();
    if candidates.len() < k {
        return Err(Error::NotEnoughVertices {
            needed: k,
            available: candidates.len(),
        });
    }

    let normals = template.vertex_normals();
    let mut features = Vec::with_capacity(candidates.len() * 6);
    for &i in &candidates {
        let p = template.vertices()[i];
        let n = normals[i];
        features.extend_from_slice(&[p.x, p.y, p.z, n.x, n.y, n.z]);
    }

    let centers = kmeans::kmeans(&features, 6, k, seed);

    // nearest candidate per cluster center, skipping already-used vertices
    let mut used = vec![false; candidates.len()];
    let mut anchors = Vec::with_capacity(k);
    for c in 0..k {
        let center = &centers[c * 6..(c + 1) * 6];
        let mut best: Option<(f64, usize)> = None;
        for (ci, &v) in candidates.iter().enumerate() {
            if used[ci] {
                continue;
            }
            let f = &features[ci * 6..(ci + 1) * 6];
            let d: f64 = f.iter().zip(center).map(|(&a, &b)| (a - b) * (a - b)).sum();
            let better = match best {
                None => true,
                Some((bd, bv)) => d < bd || (d == bd && v < bv),
            };
            if better {
                best = Some((d, v));
            }
        }
        let (_, v) = best.expect("k <= candidate count");
        used[candidates.binary_search(&v).unwrap()] = true;
        anchors.push(AnchorHandle {
            vertex_index: v,
            constraint_normal: normals[v],
            active: false,
            movement: 0.0,
        });
    }
    Ok(anchors)
}

/// Refresh the constraint normals of `anchors` from the current mesh.
pub fn reevaluate_anchor_normals(mesh: &TriMesh, anchors: &mut [AnchorHandle]) {
    let normals = mesh.vertex_normals();
    for a in anchors.iter_mut() {
        a.constraint_normal = normals[a.vertex_index];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;

    fn sphere_metadata(mesh: &TriMesh) -> TemplateMetadata {
        let seeds: Vec<(JointName, Point3<f64>)> = JointName::ALL
            .iter()
            .enumerate()
            .map(|(i, &name)| {
                let theta = i as f64 / 10.0 * std::f64::consts::PI;
                (
                    name,
                    Point3::new(theta.sin() * 0.8, theta.cos() * 0.8, 0.2),
                )
            })
            .collect();
        make_template_metadata(mesh, &seeds, 12, &[Point3::new(0.0, 1.0, 0.0)], 0.15).unwrap()
    }

    #[test]
    fn joint_positions_mean_and_translation() {
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
            Point3::new(0.0, 2.0, 0.0),
        ];
        let mesh = TriMesh::new(vertices, vec![[0, 1, 2]]).unwrap();
        let groups = vec![JointHandleGroup {
            joint_name: JointName::Head,
            vertex_indices: vec![0, 1],
        }];
        let p = joint_positions(&mesh, &groups).unwrap();
        assert_relative_eq!(p[0], Point3::new(1.0, 0.0, 0.0));

        let t = Vector3::new(3.0, -1.0, 2.0);
        let moved = mesh.transformed(&Rotation3::identity(), &t);
        let q = joint_positions(&moved, &groups).unwrap();
        assert_relative_eq!(q[0], Point3::new(1.0, 0.0, 0.0) + t);
    }

    #[test]
    fn joint_positions_rigid_equivariant() {
        let mesh = primitives::icosphere(2);
        let meta = sphere_metadata(&mesh);
        let rot = Rotation3::from_euler_angles(0.5, 0.2, -0.9);
        let t = Vector3::new(1.0, 2.0, 3.0);
        let moved = mesh.transformed(&rot, &t);
        let before = joint_positions(&mesh, &meta.groups).unwrap();
        let after = joint_positions(&moved, &meta.groups).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert_relative_eq!(rot * b + t, *a, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_vertex_group() {
        let mesh = primitives::octahedron();
        let groups = vec![JointHandleGroup {
            joint_name: JointName::Waist,
            vertex_indices: vec![4],
        }];
        let p = joint_positions(&mesh, &groups).unwrap();
        assert_eq!(p[0], mesh.vertices()[4]);
    }

    #[test]
    fn metadata_round_trip_and_validation() {
        let mesh = primitives::icosphere(2);
        let meta = sphere_metadata(&mesh);
        assert_eq!(meta.groups.len(), 10);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("meta.json");
        save_template_metadata(&meta, &p).unwrap();
        let loaded = load_template_metadata(&p, mesh.vertex_count()).unwrap();
        assert_eq!(loaded.groups, meta.groups);
        assert_eq!(loaded.excluded, meta.excluded);

        // groups are pairwise disjoint
        let mut seen = BTreeSet::new();
        for g in &loaded.groups {
            for &i in &g.vertex_indices {
                assert!(seen.insert(i), "vertex {i} in two groups");
            }
        }
    }

    #[test]
    fn metadata_missing_joint_rejected() {
        let mesh = primitives::icosphere(1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("meta.json");
        // only nine joints
        let mut joints = std::collections::BTreeMap::new();
        for name in &JointName::ALL[..9] {
            joints.insert(name.as_str().to_string(), vec![name.index()]);
        }
        let text = serde_json::to_string(&MetadataFile {
            joints,
            excluded: vec![],
        })
        .unwrap();
        std::fs::write(&p, text).unwrap();
        assert!(matches!(
            load_template_metadata(&p, mesh.vertex_count()),
            Err(Error::MissingJoint { name }) if name == "ankle_r"
        ));
    }

    #[test]
    fn metadata_out_of_range_rejected() {
        let mesh = primitives::icosphere(0); // 12 vertices
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("meta.json");
        let mut joints = std::collections::BTreeMap::new();
        for name in JointName::ALL {
            joints.insert(name.as_str().to_string(), vec![name.index()]);
        }
        joints.insert("head".to_string(), vec![400]);
        let text = serde_json::to_string(&MetadataFile {
            joints,
            excluded: vec![],
        })
        .unwrap();
        std::fs::write(&p, text).unwrap();
        assert!(matches!(
            load_template_metadata(&p, mesh.vertex_count()),
            Err(Error::VertexIndexOutOfRange { index: 400, .. })
        ));
    }

    #[test]
    fn metadata_duplicate_vertex_rejected() {
        let mesh = primitives::icosphere(1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("meta.json");
        let mut joints = std::collections::BTreeMap::new();
        for name in JointName::ALL {
            joints.insert(name.as_str().to_string(), vec![name.index()]);
        }
        joints.insert("waist".to_string(), vec![0]); // same as head's vertex
        let text = serde_json::to_string(&MetadataFile {
            joints,
            excluded: vec![],
        })
        .unwrap();
        std::fs::write(&p, text).unwrap();
        assert!(matches!(
            load_template_metadata(&p, mesh.vertex_count()),
            Err(Error::DuplicateGroupVertex { index: 0 })
        ));
    }

    #[test]
    fn anchors_deterministic_and_distinct() {
        let mesh = primitives::icosphere(3);
        let excluded = BTreeSet::new();
        let a = select_anchor_handles(&mesh, &excluded, 50, 11).unwrap();
        let b = select_anchor_handles(&mesh, &excluded, 50, 11).unwrap();
        assert_eq!(a, b);
        let distinct: BTreeSet<usize> = a.iter().map(|x| x.vertex_index).collect();
        assert_eq!(distinct.len(), 50);
        for anchor in &a {
            assert!((anchor.constraint_normal.norm() - 1.0).abs() < 1e-6);
            assert!(!anchor.active);
            assert_eq!(anchor.movement, 0.0);
        }
    }

    #[test]
    fn anchors_respect_exclusion() {
        let mesh = primitives::icosphere(3);
        // exclude the top cap
        let excluded: BTreeSet<usize> = (0..mesh.vertex_count())
            .filter(|&i| mesh.vertices()[i].y > 0.6)
            .collect();
        let anchors = select_anchor_handles(&mesh, &excluded, 80, 3).unwrap();
        for a in &anchors {
            assert!(!excluded.contains(&a.vertex_index));
        }
    }

    #[test]
    fn anchors_exhaust_candidates_when_k_equals_count() {
        let mesh = primitives::icosphere(1); // 42 vertices
        let excluded = BTreeSet::new();
        let anchors = select_anchor_handles(&mesh, &excluded, 42, 5).unwrap();
        let got: BTreeSet<usize> = anchors.iter().map(|a| a.vertex_index).collect();
        assert_eq!(got.len(), 42);
        assert!(matches!(
            select_anchor_handles(&mesh, &excluded, 43, 5),
            Err(Error::NotEnoughVertices { .. })
        ));
    }

    #[test]
    fn two_separated_clusters_get_one_anchor_each() {
        // two triangles far apart; brute-force optimal 2-means must put one
        // center in each blob, and so must the anchor selector
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.1, 0.0, 0.0),
            Point3::new(0.0, 0.1, 0.0),
            Point3::new(50.0, 0.0, 0.0),
            Point3::new(50.1, 0.0, 0.0),
            Point3::new(50.0, 0.1, 0.0),
        ];
        let mesh = TriMesh::new(vertices, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let anchors = select_anchor_handles(&mesh, &BTreeSet::new(), 2, 123).unwrap();
        let sides: BTreeSet<bool> = anchors
            .iter()
            .map(|a| mesh.vertices()[a.vertex_index].x > 25.0)
            .collect();
        assert_eq!(sides.len(), 2, "one anchor per spatial cluster");

        // brute-force verification that the 2-means optimum separates blobs:
        // enumerate all 2-partitions and minimize within-cluster variance
        let feats: Vec<[f64; 6]> = (0..6)
            .map(|i| {
                let p = mesh.vertices()[i];
                let n = mesh.vertex_normals()[i];
                [p.x, p.y, p.z, n.x, n.y, n.z]
            })
            .collect();
        let cost = |members: &[usize]| -> f64 {
            if members.is_empty() {
                return 0.0;
            }
            let mut mean = [0.0f64; 6];
            for &m in members {
                for d in 0..6 {
                    mean[d] += feats[m][d];
                }
            }
            for v in &mut mean {
                *v /= members.len() as f64;
            }
            members
                .iter()
                .map(|&m| {
                    feats[m]
                        .iter()
                        .zip(&mean)
                        .map(|(&a, &b)| (a - b) * (a - b))
                        .sum::<f64>()
                })
                .sum()
        };
        let mut best = (f64::INFINITY, 0usize);
        for sel in 1..(1 << 6) - 1 {
            let left: Vec<usize> = (0..6).filter(|i| sel & (1 << i) != 0).collect();
            let right: Vec<usize> = (0..6).filter(|i| sel & (1 << i) == 0).collect();
            let c = cost(&left) + cost(&right);
            if c < best.0 {
                best = (c, sel);
            }
        }
        // optimum is {0,1,2} vs {3,4,5} (or its complement)
        assert!(best.1 == 0b000111 || best.1 == 0b111000, "sel {:b}", best.1);
    }

    #[test]
    fn anchor_coverage_improves_with_k() {
        let mesh = primitives::icosphere(3); // 642 vertices
        let excluded = BTreeSet::new();
        let spread = |k: usize| -> f64 {
            let anchors = select_anchor_handles(&mesh, &excluded, k, 9).unwrap();
            (0..mesh.vertex_count())
                .map(|i| {
                    anchors
                        .iter()
                        .map(|a| (mesh.vertices()[i] - mesh.vertices()[a.vertex_index]).norm())
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0f64, f64::max)
        };
        let s100 = spread(100);
        let s200 = spread(200);
        assert!(s100.is_finite() && s200.is_finite());
        assert!(s200 <= s100 + 1e-12, "spread grew: {s100} -> {s200}");
    }
}
