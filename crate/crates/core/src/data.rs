//! Sample records and batch assembly.
//!
//! Images are held as raw 8-bit RGB (height-major, interleaved channels),
//! exactly the bytes that go into dataset files; they convert to [0,1]
//! float tensors (channel-major) only when a batch is assembled.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 64;
pub const IMAGE_CHANNELS: usize = 3;
pub const IMAGE_BYTES: usize = IMAGE_SIDE * IMAGE_SIDE * IMAGE_CHANNELS;

#[derive(Clone, PartialEq, Eq)]
pub struct Image {
    px: Box<[u8; IMAGE_BYTES]>,
}

impl Image {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let arr: [u8; IMAGE_BYTES] = bytes.try_into().map_err(|_| {
            Error::dimension("image", format!("expected {IMAGE_BYTES} bytes, got {}", bytes.len()))
        })?;
        Ok(Image { px: Box::new(arr) })
    }

    /// Quantize [0,1] RGB floats (height-major, interleaved) to 8-bit.
    pub fn from_rgb_f64(rgb: &[f64]) -> Result<Self> {
        if rgb.len() != IMAGE_BYTES {
            return Err(Error::dimension(
                "image",
                format!("expected {IMAGE_BYTES} floats, got {}", rgb.len()),
            ));
        }
        let mut px = Box::new([0u8; IMAGE_BYTES]);
        for (dst, &v) in px.iter_mut().zip(rgb) {
            *dst = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        Ok(Image { px })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.px[..]
    }

    /// Write this image as channel-major floats in [0,1] (exact x/255).
    fn write_chw(&self, out: &mut [f64]) {
        debug_assert_eq!(out.len(), IMAGE_BYTES);
        let plane = IMAGE_SIDE * IMAGE_SIDE;
        for y in 0..IMAGE_SIDE {
            for x in 0..IMAGE_SIDE {
                let src = (y * IMAGE_SIDE + x) * IMAGE_CHANNELS;
                let dst = y * IMAGE_SIDE + x;
                for c in 0..IMAGE_CHANNELS {
                    out[c * plane + dst] = self.px[src + c] as f64 / 255.0;
                }
            }
        }
    }
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image(64x64x3)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraspSample {
    pub patch: Image,
    /// Discrete angle bin, 0..18 (bin * 10 degrees).
    pub theta: u8,
    /// 1 = grasp succeeded.
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PushSample {
    pub begin: Image,
    pub end: Image,
    /// (x_start, y_start, x_final, y_final, z_push_height), all in [-1,1].
    pub action: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PokeSample {
    pub image: Image,
    /// (slope, intercept) of the poke response, normalized.
    pub response: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Grasp,
    Push,
    Poke,
}

impl Task {
    pub fn tag(self) -> u8 {
        match self {
            Task::Grasp => 0,
            Task::Push => 1,
            Task::Poke => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Task::Grasp),
            1 => Ok(Task::Push),
            2 => Ok(Task::Poke),
            _ => Err(Error::parse(format!("unknown task tag {tag}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Grasp => "grasp",
            Task::Push => "push",
            Task::Poke => "poke",
        }
    }
}

/// One task's worth of records, as loaded from or written to a dataset file.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Grasp(Vec<GraspSample>),
    Push(Vec<PushSample>),
    Poke(Vec<PokeSample>),
}

impl Dataset {
    pub fn task(&self) -> Task {
        match self {
            Dataset::Grasp(_) => Task::Grasp,
            Dataset::Push(_) => Task::Push,
            Dataset::Poke(_) => Task::Poke,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Grasp(v) => v.len(),
            Dataset::Push(v) => v.len(),
            Dataset::Poke(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A grasp minibatch ready for the network.
pub struct GraspBatch {
    pub patches: Tensor,
    pub thetas: Vec<usize>,
    pub labels: Vec<f64>,
}

pub struct PushBatch {
    pub begin: Tensor,
    pub end: Tensor,
    pub actions: Tensor,
}

pub struct PokeBatch {
    pub images: Tensor,
    pub responses: Tensor,
}

fn image_tensor<'a>(images: impl ExactSizeIterator<Item = &'a Image>) -> Tensor {
    let n = images.len();
    let mut data = vec![0.0; n * IMAGE_BYTES];
    for (i, img) in images.enumerate() {
        img.write_chw(&mut data[i * IMAGE_BYTES..(i + 1) * IMAGE_BYTES]);
    }
    Tensor::from_vec(&[n, IMAGE_CHANNELS, IMAGE_SIDE, IMAGE_SIDE], data)
}

pub fn grasp_batch(samples: &[GraspSample], idxs: &[usize]) -> GraspBatch {
    GraspBatch {
        patches: image_tensor(idxs.iter().map(|&i| &samples[i].patch)),
        thetas: idxs.iter().map(|&i| samples[i].theta as usize).collect(),
        labels: idxs.iter().map(|&i| samples[i].label as f64).collect(),
    }
}

pub fn push_batch(samples: &[PushSample], idxs: &[usize]) -> PushBatch {
    let actions: Vec<f64> = idxs.iter().flat_map(|&i| samples[i].action).collect();
    PushBatch {
        begin: image_tensor(idxs.iter().map(|&i| &samples[i].begin)),
        end: image_tensor(idxs.iter().map(|&i| &samples[i].end)),
        actions: Tensor::from_vec(&[idxs.len(), 5], actions),
    }
}

pub fn poke_batch(samples: &[PokeSample], idxs: &[usize]) -> PokeBatch {
    let responses: Vec<f64> = idxs.iter().flat_map(|&i| samples[i].response).collect();
    PokeBatch {
        images: image_tensor(idxs.iter().map(|&i| &samples[i].image)),
        responses: Tensor::from_vec(&[idxs.len(), 2], responses),
    }
}
