//! Leaf kinematic tree.
//!
//! Every joint carries one revolute degree of freedom about its local z axis
//! followed by a translation of the link length along local x. Two joints
//! additionally carry a fixed roll about the parent x axis: the stem root,
//! which stands the bending plane up so principal-vein rotations droop the
//! leaf, and each branch root, which lays the branch back into the blade
//! plane so the mirrored secondary veins spread sideways.
//!
//! Leaf frame: x runs from the stem root towards the tip, y is lateral and z is
//! the blade normal.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::math::{rot_x, rot_z, translation, Mat4, Vec3};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointRole {
    Stem,
    Vein,
    BranchLeft { pair: usize },
    BranchRight { pair: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub parent: Option<usize>,
    pub length: f64,
    pub theta: f64,
    /// Fixed rotation about the parent x axis applied before `theta`.
    pub roll: f64,
    pub role: JointRole,
}

impl Joint {
    /// Transform from the parent frame to this joint's frame.
    pub fn local_transform(&self) -> Mat4 {
        let twist = if self.roll == 0.0 {
            Mat4::identity()
        } else {
            rot_x(self.roll)
        };
        twist * rot_z(self.theta) * translation(Vec3::new(self.length, 0.0, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPair {
    /// Principal-vein joint both branches start from.
    pub vein_joint: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafSkeleton {
    /// Placement of the root frame. May include uniform scale.
    pub base: Mat4,
    pub joints: Vec<Joint>,
    /// ST1..STk; the last one is the leaf base B.
    pub stem: Vec<usize>,
    /// VN1..VNn; the frame of the last one is the peak PK.
    pub veins: Vec<usize>,
    pub branches: Vec<BranchPair>,
    /// Maximum deviation of a posed angle from its rest value.
    pub joint_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonParams {
    pub stem_joints: usize,
    pub vein_joints: usize,
    pub stem_length: f64,
    pub vein_length: f64,
    pub branch_pairs: usize,
    pub branch_angle: f64,
    pub branch_length_ratio: f64,
    pub branch_links: usize,
    pub joint_limit: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            stem_joints: 2,
            vein_joints: 4,
            stem_length: 0.25,
            vein_length: 0.75,
            branch_pairs: 2,
            branch_angle: 50f64.to_radians(),
            branch_length_ratio: 0.4,
            branch_links: 2,
            joint_limit: 60f64.to_radians(),
        }
    }
}

/// Rest angle of the stem root roll; positive principal angles droop.
pub const STEM_ROOT_ROLL: f64 = -FRAC_PI_2;
/// Roll of a branch root relative to its vein joint.
pub const BRANCH_ROOT_ROLL: f64 = FRAC_PI_2;

impl LeafSkeleton {
    /// Straight rest skeleton; branch pairs attach at evenly spaced vein joints,
    /// never at the tip.
    pub fn build(p: &SkeletonParams) -> Result<Self> {
        if p.stem_joints == 0 || p.vein_joints == 0 {
            return Err(Error::Structural(
                "a leaf needs at least one stem and one vein joint".into(),
            ));
        }
        if p.branch_pairs > 0 && p.branch_pairs >= p.vein_joints {
            return Err(Error::Structural(format!(
                "{} branch pairs need more than {} vein joints",
                p.branch_pairs, p.vein_joints
            )));
        }
        let stem_link = p.stem_length / p.stem_joints as f64;
        let vein_link = p.vein_length / p.vein_joints as f64;
        if !(stem_link > 0.0 && vein_link > 0.0) {
            return Err(Error::Structural("link lengths must be > 0".into()));
        }

        let mut joints = Vec::new();
        let mut stem = Vec::new();
        let mut veins = Vec::new();
        let mut parent = None;
        for i in 0..p.stem_joints {
            joints.push(Joint {
                parent,
                length: stem_link,
                theta: 0.0,
                roll: if i == 0 { STEM_ROOT_ROLL } else { 0.0 },
                role: JointRole::Stem,
            });
            parent = Some(joints.len() - 1);
            stem.push(joints.len() - 1);
        }
        for _ in 0..p.vein_joints {
            joints.push(Joint {
                parent,
                length: vein_link,
                theta: 0.0,
                roll: 0.0,
                role: JointRole::Vein,
            });
            parent = Some(joints.len() - 1);
            veins.push(joints.len() - 1);
        }

        let mut branches = Vec::new();
        let branch_link = p.branch_length_ratio * vein_link;
        for pair in 0..p.branch_pairs {
            let slot = ((pair + 1) * p.vein_joints) as f64 / (p.branch_pairs + 1) as f64;
            let vein_idx = (slot.round() as usize).clamp(1, p.vein_joints - 1) - 1;
            let vein_joint = veins[vein_idx];
            let mut chains = [Vec::new(), Vec::new()];
            for (side, chain) in chains.iter_mut().enumerate() {
                let sign = if side == 0 { 1.0 } else { -1.0 };
                let mut parent = vein_joint;
                for link in 0..p.branch_links.max(1) {
                    // First link spreads out, later links curve back towards the tip.
                    let theta = if link == 0 {
                        sign * p.branch_angle
                    } else {
                        -sign * p.branch_angle / 3.0
                    };
                    joints.push(Joint {
                        parent: Some(parent),
                        length: branch_link,
                        theta,
                        roll: if link == 0 { BRANCH_ROOT_ROLL } else { 0.0 },
                        role: if side == 0 {
                            JointRole::BranchLeft { pair }
                        } else {
                            JointRole::BranchRight { pair }
                        },
                    });
                    parent = joints.len() - 1;
                    chain.push(parent);
                }
            }
            let [left, right] = chains;
            branches.push(BranchPair {
                vein_joint,
                left,
                right,
            });
        }

        Ok(Self {
            base: Mat4::identity(),
            joints,
            stem,
            veins,
            branches,
            joint_limit: p.joint_limit,
        })
    }

    /// Index of the leaf base joint B.
    pub fn base_joint(&self) -> usize {
        *self.stem.last().expect("stem is nonempty")
    }

    /// Index of the joint whose frame is the peak PK.
    pub fn peak_joint(&self) -> usize {
        *self.veins.last().expect("veins are nonempty")
    }

    /// Sum of stem and principal-vein link lengths.
    pub fn principal_length(&self) -> f64 {
        self.stem
            .iter()
            .chain(&self.veins)
            .map(|&j| self.joints[j].length)
            .sum()
    }

    pub fn same_topology(&self, other: &LeafSkeleton) -> bool {
        self.joints.len() == other.joints.len()
            && self
                .joints
                .iter()
                .zip(&other.joints)
                .all(|(a, b)| a.parent == b.parent && a.role == b.role)
    }

    /// Start point of joint `j`'s link, i.e. the parent frame origin.
    pub fn link_start(&self, frames: &[Mat4], j: usize) -> Vec3 {
        match self.joints[j].parent {
            Some(p) => crate::math::origin(&frames[p]),
            None => crate::math::origin(&self.base),
        }
    }
}

/// World transform of every joint: `parent ∘ roll ∘ Rz(θ) ∘ Tx(length)`.
///
/// Fails on out-of-range parents, cycles and multiple roots.
pub fn forward_kinematics(skel: &LeafSkeleton) -> Result<Vec<Mat4>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Unvisited,
        Active,
        Done,
    }
    let n = skel.joints.len();
    let roots = skel.joints.iter().filter(|j| j.parent.is_none()).count();
    if n > 0 && roots != 1 {
        return Err(Error::Structural(format!(
            "kinematic tree needs exactly one root, found {roots}"
        )));
    }
    let mut frames = vec![Mat4::identity(); n];
    let mut marks = vec![Mark::Unvisited; n];
    let mut path = Vec::new();
    for start in 0..n {
        if marks[start] == Mark::Done {
            continue;
        }
        path.clear();
        let mut cur = Some(start);
        while let Some(j) = cur {
            if j >= n {
                return Err(Error::Structural(format!("parent index {j} out of range")));
            }
            match marks[j] {
                Mark::Done => break,
                Mark::Active => {
                    return Err(Error::Structural(format!("cycle through joint {j}")))
                }
                Mark::Unvisited => {
                    marks[j] = Mark::Active;
                    path.push(j);
                    cur = skel.joints[j].parent;
                }
            }
        }
        for &j in path.iter().rev() {
            let parent_frame = match skel.joints[j].parent {
                Some(p) => frames[p],
                None => skel.base,
            };
            frames[j] = parent_frame * skel.joints[j].local_transform();
            marks[j] = Mark::Done;
        }
    }
    Ok(frames)
}

/// Gravity bend plus Gaussian jitter on every joint angle.
///
/// Principal joints (stem then veins) at depth `k` of `n` receive
/// `bend * k / n`; branch links receive half that profile along their own
/// chain with opposite signs on the two sides. Every angle is clamped to
/// `joint_limit` around its rest value.
pub fn randomize_pose(skel: &LeafSkeleton, bend: f64, sigma: f64, rng: &mut Rng) -> LeafSkeleton {
    let mut out = skel.clone();
    let principal: Vec<usize> = skel.stem.iter().chain(&skel.veins).copied().collect();
    let total = principal.len() as f64;
    let mut offsets = vec![0.0; skel.joints.len()];
    for (depth, &j) in principal.iter().enumerate() {
        offsets[j] = bend * (depth + 1) as f64 / total;
    }
    for pair in &skel.branches {
        let m = pair.left.len().max(1) as f64;
        for (depth, (&l, &r)) in pair.left.iter().zip(&pair.right).enumerate() {
            let b = 0.5 * bend * (depth + 1) as f64 / m;
            offsets[l] = -b;
            offsets[r] = b;
        }
    }
    for (j, joint) in out.joints.iter_mut().enumerate() {
        let rest = skel.joints[j].theta;
        let noise = if sigma > 0.0 { rng.normal(0.0, sigma) } else { 0.0 };
        let lim = skel.joint_limit;
        joint.theta = (rest + offsets[j] + noise).clamp(rest - lim, rest + lim);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{origin, rigid_inverse, transform_point};

    fn chain(angles: &[f64], lengths: &[f64]) -> LeafSkeleton {
        let joints = angles
            .iter()
            .zip(lengths)
            .enumerate()
            .map(|(i, (&theta, &length))| Joint {
                parent: i.checked_sub(1),
                length,
                theta,
                roll: 0.0,
                role: JointRole::Vein,
            })
            .collect();
        LeafSkeleton {
            base: Mat4::identity(),
            joints,
            stem: vec![0],
            veins: (1..angles.len()).collect(),
            branches: vec![],
            joint_limit: 1.0,
        }
    }

    #[test]
    fn zero_angle_chain_reaches_sum_of_links() {
        let skel = LeafSkeleton::build(&SkeletonParams {
            stem_joints: 2,
            vein_joints: 2,
            stem_length: 0.02,
            vein_length: 0.04,
            branch_pairs: 0,
            ..SkeletonParams::default()
        })
        .unwrap();
        let frames = forward_kinematics(&skel).unwrap();
        let pk = origin(&frames[skel.peak_joint()]);
        assert!((pk.norm() - 0.06).abs() < 1e-12);
        // Every joint lies on the same ray from ST1.
        for f in &frames {
            let o = origin(f);
            assert!(o.cross(&pk).norm() < 1e-12);
        }
    }

    #[test]
    fn quarter_turn_moves_child_to_y() {
        let skel = chain(&[0.0, std::f64::consts::FRAC_PI_2], &[1.0, 1.0]);
        let frames = forward_kinematics(&skel).unwrap();
        let rel = transform_point(&rigid_inverse(&frames[0]), &origin(&frames[1]));
        assert!((rel - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cycle_is_a_structural_error() {
        let mut skel = chain(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]);
        skel.joints.push(Joint {
            parent: Some(4),
            length: 1.0,
            theta: 0.0,
            roll: 0.0,
            role: JointRole::Vein,
        });
        skel.joints.push(Joint {
            parent: Some(3),
            length: 1.0,
            theta: 0.0,
            roll: 0.0,
            role: JointRole::Vein,
        });
        assert!(matches!(forward_kinematics(&skel), Err(Error::Structural(_))));
        let mut bad = chain(&[0.0], &[1.0]);
        bad.joints[0].parent = Some(9);
        assert!(forward_kinematics(&bad).is_err());
    }

    #[test]
    fn zero_jitter_zero_bend_is_identity() {
        let skel = LeafSkeleton::build(&SkeletonParams::default()).unwrap();
        let posed = randomize_pose(&skel, 0.0, 0.0, &mut Rng::new(1));
        assert_eq!(posed, skel);
    }

    #[test]
    fn bend_droops_the_tip() {
        let skel = LeafSkeleton::build(&SkeletonParams::default()).unwrap();
        let flat = origin(&forward_kinematics(&skel).unwrap()[skel.peak_joint()]);
        for bend in [0.05, 0.3, 0.8] {
            let posed = randomize_pose(&skel, bend, 0.0, &mut Rng::new(1));
            let tip = origin(&forward_kinematics(&posed).unwrap()[posed.peak_joint()]);
            assert!(tip.z < flat.z, "bend {bend}: {} !< {}", tip.z, flat.z);
        }
    }

    #[test]
    fn jitter_sample_sigma_matches() {
        let skel = LeafSkeleton::build(&SkeletonParams::default()).unwrap();
        let mut rng = Rng::new(33);
        let probe = skel.veins[1];
        let draws: Vec<f64> = (0..1000)
            .map(|_| randomize_pose(&skel, 0.0, 0.1, &mut rng).joints[probe].theta)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() <= 0.01, "sigma {}", var.sqrt());
    }

    #[test]
    fn pose_respects_joint_limits() {
        let skel = LeafSkeleton::build(&SkeletonParams::default()).unwrap();
        let posed = randomize_pose(&skel, 10.0, 2.0, &mut Rng::new(2));
        for (a, b) in posed.joints.iter().zip(&skel.joints) {
            assert!((a.theta - b.theta).abs() <= skel.joint_limit + 1e-12);
        }
    }
}
