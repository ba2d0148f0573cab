//! IDX file parsing for the MNIST corpus.
//!
//! Headers are big-endian: a magic number (`0x00000803` images,
//! `0x00000801` labels), the item count, then rows and columns for images.
//! Pixel bytes follow row-major.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// SHA-256 digests of the standard uncompressed files.
pub const EXPECTED_SHA256: [(&str, &str); 4] = [
    (
        TRAIN_IMAGES,
        "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    ),
    (
        TRAIN_LABELS,
        "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    ),
    (
        TEST_IMAGES,
        "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    ),
    (
        TEST_LABELS,
        "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
    ),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    /// `count · rows · cols` raw bytes.
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        if self.rows * self.cols == 0 {
            0
        } else {
            self.pixels.len() / (self.rows * self.cols)
        }
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let d = self.rows * self.cols;
        &self.pixels[i * d..(i + 1) * d]
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Parse(format!("IDX header truncated at byte {offset}")))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Parse(format!("IDX images: bad magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let body = &bytes[16..];
    let expected = count * rows * cols;
    if body.len() != expected {
        return Err(Error::Parse(format!(
            "IDX images: header promises {expected} pixel bytes, file has {}",
            body.len()
        )));
    }
    Ok(IdxImages {
        rows,
        cols,
        pixels: body.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Parse(format!("IDX labels: bad magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() != count {
        return Err(Error::Parse(format!(
            "IDX labels: header promises {count} labels, file has {}",
            body.len()
        )));
    }
    if let Some(bad) = body.iter().find(|&&l| l > 9) {
        return Err(Error::Parse(format!(
            "IDX labels: digit {bad} out of range"
        )));
    }
    Ok(body.to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.count() as u32).to_be_bytes());
    out.extend_from_slice(&(images.rows as u32).to_be_bytes());
    out.extend_from_slice(&(images.cols as u32).to_be_bytes());
    out.extend_from_slice(&images.pixels);
    out
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// One image as reals in `[0, 1]` plus its digit.
#[derive(Clone, Debug, PartialEq)]
pub struct MnistItem {
    pub pixels: Vec<f64>,
    pub digit: u8,
}

pub fn load_mnist(images_path: &Path, labels_path: &Path) -> Result<Vec<MnistItem>> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| Error::io(p, e));
    let images = parse_idx_images(&read(images_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", images_path.display())))?;
    let labels = parse_idx_labels(&read(labels_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", labels_path.display())))?;
    if images.count() != labels.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels",
            images.count(),
            labels.len()
        )));
    }
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &digit)| MnistItem {
            pixels: images
                .image(i)
                .iter()
                .map(|&b| f64::from(b) / 255.0)
                .collect(),
            digit,
        })
        .collect())
}

/// Standard file locations inside `dir`.
pub struct MnistFiles {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl MnistFiles {
    pub fn in_dir(dir: &Path) -> Self {
        MnistFiles {
            train_images: dir.join(TRAIN_IMAGES),
            train_labels: dir.join(TRAIN_LABELS),
            test_images: dir.join(TEST_IMAGES),
            test_labels: dir.join(TEST_LABELS),
        }
    }

    pub fn exist(&self) -> bool {
        [
            &self.train_images,
            &self.train_labels,
            &self.test_images,
            &self.test_labels,
        ]
        .iter()
        .all(|p| p.is_file())
    }

    pub fn load_train(&self) -> Result<Vec<MnistItem>> {
        load_mnist(&self.train_images, &self.train_labels)
    }

    pub fn load_test(&self) -> Result<Vec<MnistItem>> {
        load_mnist(&self.test_images, &self.test_labels)
    }
}

/// Items whose digit is in `digits`, relabelled by position in that list.
pub fn filter_digits(items: &[MnistItem], digits: &[u8]) -> Vec<(Vec<f64>, usize)> {
    items
        .iter()
        .filter_map(|it| {
            digits
                .iter()
                .position(|&d| d == it.digit)
                .map(|class| (it.pixels.clone(), class))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_images() -> IdxImages {
        IdxImages {
            rows: 2,
            cols: 3,
            pixels: vec![0, 255, 17, 3, 4, 5, 6, 7, 8, 9, 10, 128],
        }
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let img = tiny_images();
        let bytes = write_idx_images(&img);
        assert_eq!(&bytes[..4], &[0, 0, 8, 3]);
        let back = parse_idx_images(&bytes).unwrap();
        assert_eq!(back, img);
        assert_eq!(write_idx_images(&back), bytes);

        let labels = vec![1u8, 5, 9];
        let lb = write_idx_labels(&labels);
        assert_eq!(&lb[..4], &[0, 0, 8, 1]);
        assert_eq!(write_idx_labels(&parse_idx_labels(&lb).unwrap()), lb);
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let mut bytes = write_idx_images(&tiny_images());
        bytes[3] = 1;
        assert!(parse_idx_images(&bytes).is_err());
        let bytes = write_idx_images(&tiny_images());
        assert!(parse_idx_images(&bytes[..bytes.len() - 1]).is_err());
        assert!(parse_idx_images(&bytes[..10]).is_err());
        let mut lb = write_idx_labels(&[1, 2]);
        lb[7] = 3;
        assert!(parse_idx_labels(&lb).is_err());
    }

    #[test]
    fn load_scales_pixels_and_checks_counts() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lab");
        std::fs::write(&ip, write_idx_images(&tiny_images())).unwrap();
        std::fs::write(&lp, write_idx_labels(&[1, 5])).unwrap();
        let items = load_mnist(&ip, &lp).unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[0].pixels[1], 1.0);
        assert_eq!(items[0].pixels[0], 0.0);
        assert_eq!(items[1].digit, 5);
        std::fs::write(&lp, write_idx_labels(&[1])).unwrap();
        assert!(load_mnist(&ip, &lp).is_err());
        assert!(load_mnist(&dir.path().join("missing"), &lp).is_err());
    }

    #[test]
    fn digit_filter_relabels_by_position() {
        let items: Vec<MnistItem> = [3u8, 1, 5, 1, 0]
            .iter()
            .map(|&d| MnistItem {
                pixels: vec![f64::from(d)],
                digit: d,
            })
            .collect();
        let f = filter_digits(&items, &[1, 5]);
        assert_eq!(f.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0, 1, 0]);
    }
}
