//! Scene directories: a `scene.json` manifest next to one tensor file per
//! per-view map.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    DepthAlongRay, FactoredScene, FactoredView, Intrinsics, MetricScale, Pose, RayMap,
};
use crate::grid::Grid;
use crate::io::tensor::{Tensor, TensorData};
use crate::io::write_json;
use crate::synth::{Rgb, SampleView, SceneSample};

pub const MANIFEST_NAME: &str = "scene.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewFiles {
    pub rays: String,
    pub depth: String,
    pub validity: String,
    /// u8 0/1 for ground truth, f32 probabilities for predictions.
    pub mask: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsics: Option<[f64; 4]>,
    /// `[qw, qx, qy, qz, tx, ty, tz]`, canonical quaternion.
    pub pose: [f64; 7],
    pub files: ViewFiles,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub version: u32,
    pub n_views: usize,
    pub metric_scale: f64,
    pub views: Vec<ViewEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskData {
    Hard(Grid<bool>),
    Prob(Grid<f64>),
}

impl MaskData {
    pub fn to_bool(&self) -> Grid<bool> {
        match self {
            MaskData::Hard(g) => g.clone(),
            MaskData::Prob(p) => p.map(|v| *v >= 0.5),
        }
    }

    pub fn to_prob(&self) -> Grid<f64> {
        match self {
            MaskData::Hard(g) => g.map(|b| if *b { 1.0 } else { 0.0 }),
            MaskData::Prob(p) => p.clone(),
        }
    }
}

/// Everything a scene directory can hold for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredView {
    pub intrinsics: Option<Intrinsics>,
    pub rays: RayMap,
    pub depth: DepthAlongRay,
    pub mask: MaskData,
    pub confidence: Option<Grid<f64>>,
    pub image: Option<Grid<Rgb>>,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredScene {
    pub views: Vec<StoredView>,
    pub metric_scale: MetricScale,
}

impl StoredScene {
    pub fn from_sample(s: &SceneSample) -> Self {
        Self {
            views: s
                .views
                .iter()
                .map(|v| StoredView {
                    intrinsics: v.intrinsics,
                    rays: v.rays.clone(),
                    depth: v.depth.clone(),
                    mask: MaskData::Hard(v.mask.clone()),
                    confidence: None,
                    image: v.image.clone(),
                    pose: v.pose,
                })
                .collect(),
            metric_scale: s.metric_scale,
        }
    }

    /// `images`, when given, must hold one entry per view.
    pub fn from_factored(s: &FactoredScene, images: Option<&[Grid<Rgb>]>) -> Result<Self> {
        if let Some(im) = images {
            if im.len() != s.n_views() {
                return Err(Error::ShapeMismatch(format!(
                    "{} images for {} views",
                    im.len(),
                    s.n_views()
                )));
            }
        }
        let views = s
            .views
            .iter()
            .enumerate()
            .map(|(i, v)| StoredView {
                intrinsics: None,
                rays: v.rays.clone(),
                depth: v.depth.clone(),
                mask: match &v.mask_prob {
                    Some(p) => MaskData::Prob(p.clone()),
                    None => MaskData::Hard(v.depth.validity().clone()),
                },
                confidence: v.confidence.clone(),
                image: images.map(|im| im[i].clone()),
                pose: v.pose,
            })
            .collect();
        Ok(Self {
            views,
            metric_scale: s.scale,
        })
    }

    /// Ground-truth view: the stored mask becomes hard, and view 0 must sit at
    /// the identity.
    pub fn to_sample(&self, dir: &Path) -> Result<SceneSample> {
        if let Some(v0) = self.views.first() {
            if v0.pose != Pose::identity() {
                return Err(Error::format(
                    dir.join(MANIFEST_NAME),
                    "ground-truth view 0 pose is not the identity",
                ));
            }
        }
        Ok(SceneSample {
            views: self
                .views
                .iter()
                .map(|v| SampleView {
                    intrinsics: v.intrinsics,
                    rays: v.rays.clone(),
                    depth: v.depth.clone(),
                    mask: v.mask.to_bool(),
                    pose: v.pose,
                    image: v.image.clone(),
                })
                .collect(),
            metric_scale: self.metric_scale,
        })
    }

    pub fn to_factored(&self) -> FactoredScene {
        FactoredScene {
            views: self
                .views
                .iter()
                .map(|v| FactoredView {
                    rays: v.rays.clone(),
                    depth: v.depth.clone(),
                    pose: v.pose,
                    confidence: v.confidence.clone(),
                    mask_prob: Some(v.mask.to_prob()),
                })
                .collect(),
            scale: self.metric_scale,
        }
    }

    pub fn images(&self) -> Option<Vec<Grid<Rgb>>> {
        self.views.iter().map(|v| v.image.clone()).collect()
    }
}

fn check_file_name(manifest: &Path, name: &str) -> Result<()> {
    let p = Path::new(name);
    let plain = p.components().count() == 1
        && matches!(p.components().next(), Some(std::path::Component::Normal(_)));
    if plain {
        Ok(())
    } else {
        Err(Error::format(
            manifest,
            format!("file entry `{name}` must be a plain file name"),
        ))
    }
}

pub fn write_scene(dir: &Path, scene: &StoredScene) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(scene.views.len());
    for (i, v) in scene.views.iter().enumerate() {
        let name = |kind: &str| format!("view{i:03}_{kind}.mapt");
        let put = |kind: &str, t: Tensor| -> Result<String> {
            let n = name(kind);
            t.write(&dir.join(&n))?;
            Ok(n)
        };
        let files = ViewFiles {
            rays: put("rays", Tensor::from_vec3_grid(v.rays.directions()))?,
            depth: put("depth", Tensor::from_f64_grid(v.depth.values()))?,
            validity: put("validity", Tensor::from_bool_grid(v.depth.validity()))?,
            mask: put(
                "mask",
                match &v.mask {
                    MaskData::Hard(g) => Tensor::from_bool_grid(g),
                    MaskData::Prob(p) => Tensor::from_f64_grid(p),
                },
            )?,
            confidence: v
                .confidence
                .as_ref()
                .map(|c| put("confidence", Tensor::from_f64_grid(c)))
                .transpose()?,
            image: v
                .image
                .as_ref()
                .map(|im| put("image", Tensor::from_rgb_grid(im)))
                .transpose()?,
        };
        entries.push(ViewEntry {
            width: v.rays.width(),
            height: v.rays.height(),
            intrinsics: v.intrinsics.map(|k| k.to_array()),
            pose: v.pose.to_array(),
            files,
        });
    }
    let manifest = SceneManifest {
        version: MANIFEST_VERSION,
        n_views: entries.len(),
        metric_scale: scene.metric_scale.value(),
        views: entries,
    };
    write_json(&dir.join(MANIFEST_NAME), &manifest)
}

pub fn read_manifest(dir: &Path) -> Result<SceneManifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: SceneManifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported manifest version {}", m.version),
        ));
    }
    if m.n_views != m.views.len() || m.n_views == 0 {
        return Err(Error::format(
            &path,
            format!("n_views {} but {} view entries", m.n_views, m.views.len()),
        ));
    }
    Ok(m)
}

pub fn read_scene(dir: &Path) -> Result<StoredScene> {
    let m = read_manifest(dir)?;
    let mpath = dir.join(MANIFEST_NAME);
    let metric_scale =
        MetricScale::new(m.metric_scale).map_err(|e| Error::format(&mpath, e.to_string()))?;
    let mut views = Vec::with_capacity(m.n_views);
    for (i, e) in m.views.iter().enumerate() {
        let (w, h) = (e.width, e.height);
        let load = |name: &str| -> Result<(PathBuf, Tensor)> {
            check_file_name(&mpath, name)?;
            let p = dir.join(name);
            let t = Tensor::read(&p)?;
            Ok((p, t))
        };
        let ctx = |p: &Path, field: &str, msg: String| {
            Error::format(p, format!("view {i} {field}: {msg}"))
        };

        let (p, t) = load(&e.files.rays)?;
        let rays = RayMap::new(t.to_vec3_grid(w, h).map_err(|m| ctx(&p, "rays", m))?)
            .map_err(|err| ctx(&p, "rays", err.to_string()))?;
        let (p, t) = load(&e.files.depth)?;
        let values = t.to_f64_grid(w, h).map_err(|m| ctx(&p, "depth", m))?;
        let (vp, t) = load(&e.files.validity)?;
        let validity = t.to_bool_grid(w, h).map_err(|m| ctx(&vp, "validity", m))?;
        let depth = DepthAlongRay::new(values, validity)
            .map_err(|err| ctx(&p, "depth", err.to_string()))?;
        let (p, t) = load(&e.files.mask)?;
        let mask = match t.data() {
            TensorData::U8(_) => {
                MaskData::Hard(t.to_bool_grid(w, h).map_err(|m| ctx(&p, "mask", m))?)
            }
            TensorData::F32(_) => {
                MaskData::Prob(t.to_f64_grid(w, h).map_err(|m| ctx(&p, "mask", m))?)
            }
        };
        let confidence = match &e.files.confidence {
            Some(n) => {
                let (p, t) = load(n)?;
                Some(t.to_f64_grid(w, h).map_err(|m| ctx(&p, "confidence", m))?)
            }
            None => None,
        };
        let image = match &e.files.image {
            Some(n) => {
                let (p, t) = load(n)?;
                Some(t.to_rgb_grid(w, h).map_err(|m| ctx(&p, "image", m))?)
            }
            None => None,
        };
        let intrinsics = e
            .intrinsics
            .map(|[fx, fy, cx, cy]| Intrinsics::new(fx, fy, cx, cy))
            .transpose()
            .map_err(|err| ctx(&mpath, "intrinsics", err.to_string()))?;
        let pose = Pose::from_stored(e.pose).map_err(|err| ctx(&mpath, "pose", err.to_string()))?;
        views.push(StoredView {
            intrinsics,
            rays,
            depth,
            mask,
            confidence,
            image,
            pose,
        });
    }
    Ok(StoredScene {
        views,
        metric_scale,
    })
}

pub fn write_sample(dir: &Path, s: &SceneSample) -> Result<()> {
    write_scene(dir, &StoredScene::from_sample(s))
}

pub fn read_sample(dir: &Path) -> Result<SceneSample> {
    read_scene(dir)?.to_sample(dir)
}

pub fn read_factored(dir: &Path) -> Result<FactoredScene> {
    Ok(read_scene(dir)?.to_factored())
}
