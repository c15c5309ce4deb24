use crate::scene::{Vocabulary, DEPTHS};

use super::{ABSOLUTE_COMPONENTS, RELATIVE_COMPONENTS};

/// Named blocks laid out back to back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    pub blocks: Vec<(String, usize)>,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.blocks.iter().map(|(_, w)| w).sum()
    }

    /// Start offset of a named block.
    pub fn offset(&self, name: &str) -> Option<usize> {
        let mut at = 0;
        for (n, w) in &self.blocks {
            if n == name {
                return Some(at);
            }
            at += w;
        }
        None
    }
}

/// Widths of the attended feature vector. The defaults give 563 per
/// object and 1432 overall.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttendedLayout {
    pub instance_width: usize,
    pub pose_width: usize,
    pub expression_width: usize,
    pub animal_width: usize,
    pub relative_width: usize,
}

impl AttendedLayout {
    pub const MIN_INSTANCE_WIDTH: usize = 254;
    pub const POSE_WIDTH: usize = 224;
    pub const MIN_EXPRESSION_WIDTH: usize = 10;

    pub fn new(vocab: &Vocabulary) -> Self {
        AttendedLayout {
            instance_width: vocab.len().max(Self::MIN_INSTANCE_WIDTH),
            pose_width: Self::POSE_WIDTH,
            expression_width: vocab.expressions().max(Self::MIN_EXPRESSION_WIDTH),
            animal_width: crate::scene::ANIMAL_POSES,
            relative_width: 2 * RELATIVE_COMPONENTS,
        }
    }

    pub fn absolute_width(&self) -> usize {
        DEPTHS * (ABSOLUTE_COMPONENTS + 1)
    }

    /// Age 5, gender 2, skin 3, pose, expression.
    pub fn human_width(&self) -> usize {
        5 + 2 + 3 + self.pose_width + self.expression_width
    }

    pub fn object_width(&self) -> usize {
        4 + self.instance_width + 1 + self.absolute_width() + self.human_width() + self.animal_width
    }

    pub fn context_width(&self) -> usize {
        4 + self.instance_width
    }

    pub fn total(&self) -> usize {
        2 * self.object_width() + self.relative_width + self.context_width()
    }

    pub fn object_layout(&self) -> FeatureLayout {
        FeatureLayout {
            blocks: vec![
                ("category".into(), 4),
                ("instance".into(), self.instance_width),
                ("flip".into(), 1),
                ("absolute_location".into(), self.absolute_width()),
                ("age".into(), 5),
                ("gender".into(), 2),
                ("skin".into(), 3),
                ("pose".into(), self.pose_width),
                ("expression".into(), self.expression_width),
                ("animal_pose".into(), self.animal_width),
            ],
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            blocks: vec![
                ("p_object".into(), self.object_width()),
                ("s_object".into(), self.object_width()),
                ("relative_location".into(), self.relative_width),
                ("scene_context".into(), self.context_width()),
            ],
        }
    }
}

/// Widths of the holistic feature vector: five regions, each an instance
/// bag, an expression histogram and a pose-cluster histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HolisticLayout {
    /// Instances counted in the bag, in slot order.
    pub instance_ids: Vec<usize>,
    pub bag_width: usize,
    pub expressions: usize,
    pub clusters: usize,
    slots: Vec<Option<usize>>,
}

impl HolisticLayout {
    pub const MIN_BAG_WIDTH: usize = 150;
    pub const REGIONS: usize = 5;

    /// Bags every non-human instance; humans are described by their
    /// expression and pose cluster instead.
    pub fn new(vocab: &Vocabulary, clusters: usize) -> Self {
        let instance_ids = vocab.non_human_ids();
        let mut slots = vec![None; vocab.len()];
        for (slot, &id) in instance_ids.iter().enumerate() {
            slots[id] = Some(slot);
        }
        HolisticLayout {
            bag_width: instance_ids.len().max(Self::MIN_BAG_WIDTH),
            instance_ids,
            expressions: vocab.expressions(),
            clusters,
            slots,
        }
    }

    pub fn instance_slot(&self, instance_id: usize) -> Option<usize> {
        self.slots.get(instance_id).copied().flatten()
    }

    pub fn region_width(&self) -> usize {
        self.bag_width + self.expressions + self.clusters
    }

    pub fn total(&self) -> usize {
        Self::REGIONS * self.region_width()
    }

    pub fn layout(&self) -> FeatureLayout {
        let names = ["full", "top_left", "top_right", "bottom_left", "bottom_right"];
        FeatureLayout {
            blocks: names
                .iter()
                .flat_map(|r| {
                    [
                        (format!("{r}_instances"), self.bag_width),
                        (format!("{r}_expressions"), self.expressions),
                        (format!("{r}_pose_clusters"), self.clusters),
                    ]
                })
                .collect(),
        }
    }
}
