//! Depth images, binary masks, morphology and connected components.

use crate::par;

/// Depth in metres; invalid pixels are −1.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), width * height, "depth buffer size");
        DepthImage { width, height, data }
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        DepthImage { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl BinaryImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        BinaryImage { width, height, data: vec![0; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b != 0).count()
    }
}

/// 3×3 min (`erode`) or max filter, separable. Pixels outside the image are
/// ignored.
fn filter3(img: &BinaryImage, erode: bool) -> BinaryImage {
    let (w, h) = (img.width, img.height);
    let pick = |a: u8, b: u8| if erode { a.min(b) } else { a.max(b) };
    let mut tmp = vec![0u8; w * h];
    par::for_each_chunk_mut(&mut tmp, w.max(1), |y, row| {
        let src = &img.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut v = src[x];
            if x > 0 {
                v = pick(v, src[x - 1]);
            }
            if x + 1 < w {
                v = pick(v, src[x + 1]);
            }
            row[x] = v;
        }
    });
    let mut out = vec![0u8; w * h];
    par::for_each_chunk_mut(&mut out, w.max(1), |y, row| {
        for x in 0..w {
            let mut v = tmp[y * w + x];
            if y > 0 {
                v = pick(v, tmp[(y - 1) * w + x]);
            }
            if y + 1 < h {
                v = pick(v, tmp[(y + 1) * w + x]);
            }
            row[x] = v;
        }
    });
    BinaryImage { width: w, height: h, data: out }
}

pub fn erode3(img: &BinaryImage) -> BinaryImage {
    filter3(img, true)
}

pub fn dilate3(img: &BinaryImage) -> BinaryImage {
    filter3(img, false)
}

/// Morphological open with a 3×3 square structuring element.
pub fn open3(img: &BinaryImage) -> BinaryImage {
    dilate3(&erode3(img))
}

/// Component image: 0 is background, components are numbered from 1 in order
/// of their first pixel in raster order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Components {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    /// `areas[k - 1]` is the pixel count of component k.
    pub areas: Vec<usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn pixels(&self, k: u32) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == k)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // keep the smaller provisional label as root
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// 8-connected components of `mask` (two-pass union-find).
pub fn label_components(mask: &BinaryImage) -> Components {
    let (w, h) = (mask.width, mask.height);
    let mut prov = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if mask.data[i] == 0 {
                continue;
            }
            let mut neigh = [0u32; 4];
            if x > 0 {
                neigh[0] = prov[i - 1];
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    neigh[1] = prov[up + x - 1];
                }
                neigh[2] = prov[up + x];
                if x + 1 < w {
                    neigh[3] = prov[up + x + 1];
                }
            }
            let m = neigh.iter().copied().filter(|&l| l != 0).min();
            match m {
                None => {
                    let l = parent.len() as u32;
                    parent.push(l);
                    prov[i] = l;
                }
                Some(m) => {
                    prov[i] = m;
                    for &l in &neigh {
                        if l != 0 && l != m {
                            union(&mut parent, m, l);
                        }
                    }
                }
            }
        }
    }
    let mut remap = vec![0u32; parent.len()];
    let mut areas = Vec::new();
    let mut labels = vec![0u32; w * h];
    for i in 0..w * h {
        if prov[i] == 0 {
            continue;
        }
        let r = find(&mut parent, prov[i]) as usize;
        if remap[r] == 0 {
            areas.push(0);
            remap[r] = areas.len() as u32;
        }
        labels[i] = remap[r];
        areas[remap[r] as usize - 1] += 1;
    }
    Components { width: w, height: h, labels, areas }
}

/// Drops components whose area lies outside `[min_area, max_area]` and
/// renumbers the survivors in their original order.
pub fn filter_components(c: &Components, min_area: usize, max_area: usize) -> Components {
    let mut remap = vec![0u32; c.areas.len() + 1];
    let mut areas = Vec::new();
    for (k, &a) in c.areas.iter().enumerate() {
        if a >= min_area && a <= max_area {
            areas.push(a);
            remap[k + 1] = areas.len() as u32;
        }
    }
    let labels = c.labels.iter().map(|&l| remap[l as usize]).collect();
    Components { width: c.width, height: c.height, labels, areas }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(rows: &[&str]) -> BinaryImage {
        let w = rows[0].len();
        let data = rows.iter().flat_map(|r| r.bytes().map(|b| (b == b'#') as u8)).collect();
        BinaryImage { width: w, height: rows.len(), data }
    }

    #[test]
    fn two_blobs() {
        let m = mask(&["##...", "##..#", "....#", "#...."]);
        let c = label_components(&m);
        assert_eq!(c.areas, vec![4, 2, 1]);
        assert!(label_components(&BinaryImage::zeros(4, 4)).is_empty());
    }

    #[test]
    fn diagonal_is_connected() {
        let m = mask(&["#..", ".#.", "..#"]);
        assert_eq!(label_components(&m).areas, vec![3]);
        let m = mask(&["..#", ".#.", "#.."]);
        assert_eq!(label_components(&m).areas, vec![3]);
    }

    #[test]
    fn open_removes_speckle_keeps_blocks() {
        let m = mask(&["#.....", "......", "..###.", "..###.", "..###."]);
        let o = open3(&m);
        assert!(!o.get(0, 0));
        assert_eq!(o.count(), 9);
    }

    #[test]
    fn area_filter() {
        let m = mask(&["##...", "##..#", "....#"]);
        let c = filter_components(&label_components(&m), 3, 10);
        assert_eq!(c.areas, vec![4]);
        assert_eq!(c.labels.iter().filter(|&&l| l == 1).count(), 4);
    }
}
