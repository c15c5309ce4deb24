//! Attended and holistic scene features, plus the spatial mixtures and pose
//! clusters they are built from.

mod bank;
pub mod gmm;
mod io;
pub mod kmeans;
mod layout;

pub use bank::{fit_gmms, fit_pose_clusters, GmmBank, PoseClusterBank, ABSOLUTE_COMPONENTS, RELATIVE_COMPONENTS};
pub use io::{read_features, read_features_file, write_features, FeatureMatrix};
pub use layout::{AttendedLayout, FeatureLayout, HolisticLayout};

use crate::alignment::Alignment;
use crate::scene::{Category, Scene, DEPTHS};
use crate::{Error, Result};

/// Raw pose values in the pose block; per-part `(x, y, cos, sin)` follow.
const RAW_POSE: usize = 45;

/// The 563-wide (default layout) description of one scene object.
pub fn object_features(scene: &Scene, obj: usize, bank: &GmmBank, layout: &AttendedLayout) -> Result<Vec<f64>> {
    let mut v = vec![0.0; layout.object_width()];
    write_object(&mut v, scene, obj, bank, layout)?;
    Ok(v)
}

fn write_object(v: &mut [f64], scene: &Scene, obj: usize, bank: &GmmBank, layout: &AttendedLayout) -> Result<()> {
    let o = scene
        .objects
        .get(obj)
        .ok_or_else(|| Error::Dimension(format!("object {obj} not in scene {}", scene.scene_id)))?;
    if o.instance_id >= layout.instance_width {
        return Err(Error::InstanceOutOfVocabulary {
            instance_id: o.instance_id,
            size: layout.instance_width,
        });
    }
    let mut at = 0;
    v[at + o.category.index()] = 1.0;
    at += 4;
    v[at + o.instance_id] = 1.0;
    at += layout.instance_width;
    v[at] = if o.flip { 1.0 } else { 0.0 };
    at += 1;

    let depth = o.depth as usize;
    let seg = at + depth * (bank.absolute[depth].components() + 1);
    let resp = bank.absolute[depth].responsibilities([o.x, o.y]);
    v[seg..seg + resp.len()].copy_from_slice(&resp);
    v[seg + resp.len()] = 1.0;
    at += layout.absolute_width();

    if o.category == Category::Human {
        let one_hot = |v: &mut [f64], base: usize, width: usize, id: Option<usize>| {
            if let Some(i) = id.filter(|&i| i < width) {
                v[base + i] = 1.0;
            }
        };
        one_hot(v, at, 5, o.age_id);
        one_hot(v, at + 5, 2, o.gender_id);
        one_hot(v, at + 7, 3, o.skin_id);
        let pose_at = at + 10;
        if let Some(parts) = &o.pose {
            let raw = crate::scene::pose_vector(parts);
            let n = raw.len().min(RAW_POSE);
            v[pose_at..pose_at + n].copy_from_slice(&raw[..n]);
            for (k, p) in parts.iter().enumerate().take((layout.pose_width - RAW_POSE) / 4) {
                let b = pose_at + RAW_POSE + 4 * k;
                v[b] = p[0];
                v[b + 1] = p[1];
                v[b + 2] = p[2].cos();
                v[b + 3] = p[2].sin();
            }
        }
        one_hot(v, pose_at + layout.pose_width, layout.expression_width, o.expression_id);
    }
    at += layout.human_width();

    if let Some(p) = o.animal_pose_id.filter(|_| o.category == Category::Animal) {
        if p < layout.animal_width {
            v[at + p] = 1.0;
        }
    }
    Ok(())
}

/// Responsibilities of the relative-location mixture at `s - p` and at
/// `p - s`; zeros without S.
pub fn relative_features(scene: &Scene, p: usize, s: Option<usize>, bank: &GmmBank) -> Vec<f64> {
    let k = bank.relative.components();
    let mut v = vec![0.0; 2 * k];
    if let Some(s) = s {
        let (a, b) = (&scene.objects[p], &scene.objects[s]);
        v[..k].copy_from_slice(&bank.relative.responsibilities([b.x - a.x, b.y - a.y]));
        v[k..].copy_from_slice(&bank.relative.responsibilities([a.x - b.x, a.y - b.y]));
    }
    v
}

/// Category and instance presence over every object except P and S.
pub fn scene_context_features(scene: &Scene, p: Option<usize>, s: Option<usize>, layout: &AttendedLayout) -> Vec<f64> {
    let mut v = vec![0.0; layout.context_width()];
    for (i, o) in scene.objects.iter().enumerate() {
        if Some(i) == p || Some(i) == s || o.instance_id >= layout.instance_width {
            continue;
        }
        v[o.category.index()] = 1.0;
        v[4 + o.instance_id] = 1.0;
    }
    v
}

/// P object ++ S object ++ relative location ++ scene context.
pub fn attended_features(
    scene: &Scene,
    alignment: &Alignment,
    bank: &GmmBank,
    layout: &AttendedLayout,
) -> Result<Vec<f64>> {
    let ow = layout.object_width();
    let mut v = vec![0.0; layout.total()];
    if let Some(p) = alignment.p_object {
        write_object(&mut v[..ow], scene, p, bank, layout)?;
        if let Some(s) = alignment.s_object {
            write_object(&mut v[ow..2 * ow], scene, s, bank, layout)?;
        }
        let rel = relative_features(scene, p, alignment.s_object, bank);
        v[2 * ow..2 * ow + rel.len()].copy_from_slice(&rel);
    }
    let ctx = scene_context_features(scene, alignment.p_object, alignment.s_object, layout);
    let at = 2 * ow + layout.relative_width;
    v[at..at + ctx.len()].copy_from_slice(&ctx);
    Ok(v)
}

/// Quadrant of a point: bit 0 set right of center, bit 1 below it. Points
/// on a midline go to the lower index.
pub fn quadrant(x: f64, y: f64) -> usize {
    usize::from(x > 0.5) + 2 * usize::from(y > 0.5)
}

/// Instance, expression and pose-cluster histograms of the whole scene
/// followed by its four quadrants.
pub fn holistic_features(scene: &Scene, clusters: &PoseClusterBank, layout: &HolisticLayout) -> Vec<f64> {
    let rw = layout.region_width();
    let mut v = vec![0.0; layout.total()];
    for o in &scene.objects {
        for region in [0, 1 + quadrant(o.x, o.y)] {
            let base = region * rw;
            if let Some(slot) = layout.instance_slot(o.instance_id) {
                v[base + slot] += 1.0;
            }
            if o.category == Category::Human {
                if let Some(e) = o.expression_id.filter(|&e| e < layout.expressions) {
                    v[base + layout.bag_width + e] += 1.0;
                }
                if let Some(pose) = o.pose_vector() {
                    let c = clusters.nearest(&pose);
                    v[base + layout.bag_width + layout.expressions + c] += 1.0;
                }
            }
        }
    }
    v
}

/// Number of depth segments in the absolute-location block.
pub const DEPTH_SEGMENTS: usize = DEPTHS;

#[cfg(test)]
mod tests;
