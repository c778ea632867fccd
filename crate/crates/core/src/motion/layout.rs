//! Marker layouts.
//!
//! Every layout is derived from the 15 anatomical base markers. Subsets pick
//! base markers; the 30-marker layout appends the midpoint of each of 15
//! skeletal segments.
//!
//! | count | markers |
//! |-------|---------|
//! | 8     | shoulders, wrists, knees, ankles (no midline, no head) |
//! | 10    | head, shoulders, wrists, pelvis center, knees, ankles |
//! | 15    | all base markers |
//! | 30    | base markers followed by 15 segment midpoints |

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{MotionError, Vec2};

pub const SUPPORTED_MARKER_COUNTS: [u32; 4] = [8, 10, 15, 30];
pub const BASE_MARKER_COUNT: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Shoulder,
    Elbow,
    Wrist,
    Hip,
    Knee,
    Ankle,
}

/// The 15 anatomical markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseRole {
    Head,
    Sternum,
    PelvisCenter,
    Joint(Side, Joint),
}

impl BaseRole {
    /// Canonical base order; data files and poses index markers in this order.
    pub const ALL: [BaseRole; BASE_MARKER_COUNT] = [
        BaseRole::Head,
        BaseRole::Sternum,
        BaseRole::PelvisCenter,
        BaseRole::Joint(Side::Right, Joint::Shoulder),
        BaseRole::Joint(Side::Right, Joint::Elbow),
        BaseRole::Joint(Side::Right, Joint::Wrist),
        BaseRole::Joint(Side::Left, Joint::Shoulder),
        BaseRole::Joint(Side::Left, Joint::Elbow),
        BaseRole::Joint(Side::Left, Joint::Wrist),
        BaseRole::Joint(Side::Right, Joint::Hip),
        BaseRole::Joint(Side::Right, Joint::Knee),
        BaseRole::Joint(Side::Right, Joint::Ankle),
        BaseRole::Joint(Side::Left, Joint::Hip),
        BaseRole::Joint(Side::Left, Joint::Knee),
        BaseRole::Joint(Side::Left, Joint::Ankle),
    ];

    pub fn index(self) -> usize {
        BaseRole::ALL
            .iter()
            .position(|r| *r == self)
            .expect("every base role is listed")
    }

    pub fn side(self) -> Option<Side> {
        match self {
            BaseRole::Joint(side, _) => Some(side),
            _ => None,
        }
    }

    /// Mirror partner for bilateral markers.
    pub fn partner(self) -> Option<BaseRole> {
        match self {
            BaseRole::Joint(Side::Left, j) => Some(BaseRole::Joint(Side::Right, j)),
            BaseRole::Joint(Side::Right, j) => Some(BaseRole::Joint(Side::Left, j)),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        use Joint::*;
        use Side::*;
        match self {
            BaseRole::Head => "head",
            BaseRole::Sternum => "sternum",
            BaseRole::PelvisCenter => "pelvis",
            BaseRole::Joint(Right, Shoulder) => "r_shoulder",
            BaseRole::Joint(Right, Elbow) => "r_elbow",
            BaseRole::Joint(Right, Wrist) => "r_wrist",
            BaseRole::Joint(Right, Hip) => "r_hip",
            BaseRole::Joint(Right, Knee) => "r_knee",
            BaseRole::Joint(Right, Ankle) => "r_ankle",
            BaseRole::Joint(Left, Shoulder) => "l_shoulder",
            BaseRole::Joint(Left, Elbow) => "l_elbow",
            BaseRole::Joint(Left, Wrist) => "l_wrist",
            BaseRole::Joint(Left, Hip) => "l_hip",
            BaseRole::Joint(Left, Knee) => "l_knee",
            BaseRole::Joint(Left, Ankle) => "l_ankle",
        }
    }

    pub fn from_label(label: &str) -> Option<BaseRole> {
        BaseRole::ALL.into_iter().find(|r| r.label() == label)
    }
}

impl fmt::Display for BaseRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Skeletal segments whose midpoints form the extra 15 markers of the 30-marker layout.
///
/// The midline sternum-pelvis segment is replaced with the two lateral
/// shoulder-hip torso edges so that left/right pairing carries over.
pub const SEGMENTS: [(BaseRole, BaseRole); 15] = {
    use Joint::*;
    use Side::*;
    const fn j(s: Side, j: Joint) -> BaseRole {
        BaseRole::Joint(s, j)
    }
    [
        (BaseRole::Head, BaseRole::Sternum),
        (BaseRole::Sternum, j(Right, Shoulder)),
        (j(Right, Shoulder), j(Right, Elbow)),
        (j(Right, Elbow), j(Right, Wrist)),
        (BaseRole::Sternum, j(Left, Shoulder)),
        (j(Left, Shoulder), j(Left, Elbow)),
        (j(Left, Elbow), j(Left, Wrist)),
        (BaseRole::PelvisCenter, j(Right, Hip)),
        (j(Right, Hip), j(Right, Knee)),
        (j(Right, Knee), j(Right, Ankle)),
        (BaseRole::PelvisCenter, j(Left, Hip)),
        (j(Left, Hip), j(Left, Knee)),
        (j(Left, Knee), j(Left, Ankle)),
        (j(Right, Shoulder), j(Right, Hip)),
        (j(Left, Shoulder), j(Left, Hip)),
    ]
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MarkerRole {
    Base(BaseRole),
    Midpoint(BaseRole, BaseRole),
}

impl MarkerRole {
    pub fn side(self) -> Option<Side> {
        match self {
            MarkerRole::Base(r) => r.side(),
            MarkerRole::Midpoint(a, b) => a.side().or(b.side()),
        }
    }

    pub fn label(self) -> String {
        match self {
            MarkerRole::Base(r) => r.label().to_string(),
            MarkerRole::Midpoint(a, b) => format!("mid:{}-{}", a.label(), b.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkerLayout {
    marker_count: u32,
    roles: Vec<MarkerRole>,
}

impl MarkerLayout {
    pub fn marker_count(&self) -> u32 {
        self.marker_count
    }

    pub fn roles(&self) -> &[MarkerRole] {
        &self.roles
    }

    /// Number of base markers the layout is derived from.
    pub fn base_count(&self) -> usize {
        BASE_MARKER_COUNT
    }

    /// Maps base-marker positions to this layout's markers.
    pub fn project(&self, base: &[Vec2]) -> Result<Vec<Vec2>, MotionError> {
        if base.len() != BASE_MARKER_COUNT {
            return Err(MotionError::ParamMismatch {
                expected: BASE_MARKER_COUNT,
                found: base.len(),
            });
        }
        Ok(self
            .roles
            .iter()
            .map(|role| match *role {
                MarkerRole::Base(r) => base[r.index()],
                MarkerRole::Midpoint(a, b) => {
                    let (pa, pb) = (base[a.index()], base[b.index()]);
                    [(pa[0] + pb[0]) * 0.5, (pa[1] + pb[1]) * 0.5]
                }
            })
            .collect())
    }
}

pub fn build_layout(marker_count: u32) -> Result<MarkerLayout, MotionError> {
    use Joint::*;
    use Side::*;
    let base = |roles: &[BaseRole]| roles.iter().copied().map(MarkerRole::Base).collect();
    let roles: Vec<MarkerRole> = match marker_count {
        8 => base(&[
            BaseRole::Joint(Right, Shoulder),
            BaseRole::Joint(Right, Wrist),
            BaseRole::Joint(Left, Shoulder),
            BaseRole::Joint(Left, Wrist),
            BaseRole::Joint(Right, Knee),
            BaseRole::Joint(Right, Ankle),
            BaseRole::Joint(Left, Knee),
            BaseRole::Joint(Left, Ankle),
        ]),
        10 => base(&[
            BaseRole::Head,
            BaseRole::Joint(Right, Shoulder),
            BaseRole::Joint(Right, Wrist),
            BaseRole::Joint(Left, Shoulder),
            BaseRole::Joint(Left, Wrist),
            BaseRole::PelvisCenter,
            BaseRole::Joint(Right, Knee),
            BaseRole::Joint(Right, Ankle),
            BaseRole::Joint(Left, Knee),
            BaseRole::Joint(Left, Ankle),
        ]),
        15 => base(&BaseRole::ALL),
        30 => BaseRole::ALL
            .into_iter()
            .map(MarkerRole::Base)
            .chain(SEGMENTS.iter().map(|&(a, b)| MarkerRole::Midpoint(a, b)))
            .collect(),
        other => return Err(MotionError::UnsupportedLayout(other)),
    };
    debug_assert_eq!(roles.len(), marker_count as usize);
    Ok(MarkerLayout {
        marker_count,
        roles,
    })
}
