use super::{Voxel, VoxelId, VoxelPos};

/// Edge length of the occupancy bricks used for empty-space skipping.
pub const BRICK: i32 = 8;
const BRICK_SHIFT: u32 = 3;
const EMPTY: u32 = u32::MAX;
/// Largest bounding box (in cells) for which a dense grid is allocated.
const MAX_CELLS: usize = 1 << 26;

/// Dense voxel-id lookup over a scene's bounding box, plus a coarse brick
/// map holding each brick's Chebyshev distance (in bricks) to the nearest
/// occupied brick.
#[derive(Clone, Debug)]
pub struct DenseGrid {
    min: VoxelPos,
    dims: [i32; 3],
    cells: Vec<u32>,
    brick_dims: [i32; 3],
    brick_dist: Vec<u8>,
}

impl DenseGrid {
    pub(crate) fn build(voxels: &[Voxel]) -> Option<DenseGrid> {
        let first = voxels.first()?.position;
        let (mut lo, mut hi) = (first, first);
        for v in voxels {
            let p = v.position;
            lo = VoxelPos::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = VoxelPos::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        let dims = [hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1];
        let total = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))?;
        if total > MAX_CELLS {
            return None;
        }
        let brick_dims = dims.map(|d| (d + BRICK - 1) / BRICK);
        let mut grid = DenseGrid {
            min: lo,
            dims,
            cells: vec![EMPTY; total],
            brick_dims,
            brick_dist: vec![u8::MAX; brick_dims.iter().map(|&d| d as usize).product()],
        };
        for (i, v) in voxels.iter().enumerate() {
            let (x, y, z) = grid.local(v.position);
            let c = grid.cell_index(x, y, z);
            grid.cells[c] = i as u32;
            let b = grid.brick_index(x >> BRICK_SHIFT, y >> BRICK_SHIFT, z >> BRICK_SHIFT);
            grid.brick_dist[b] = 0;
        }
        grid.fill_brick_distances();
        Some(grid)
    }

    /// Multi-source BFS over the 26-neighbourhood gives exact Chebyshev
    /// distances.
    fn fill_brick_distances(&mut self) {
        let [bx, by, bz] = self.brick_dims;
        let mut frontier: Vec<(i32, i32, i32)> = Vec::new();
        for z in 0..bz {
            for y in 0..by {
                for x in 0..bx {
                    if self.brick_dist[self.brick_index(x, y, z)] == 0 {
                        frontier.push((x, y, z));
                    }
                }
            }
        }
        let mut d = 0u8;
        while !frontier.is_empty() && d < u8::MAX - 1 {
            d += 1;
            let mut next = Vec::new();
            for (x, y, z) in frontier {
                for dz in -1..=1 {
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let (nx, ny, nz) = (x + dx, y + dy, z + dz);
                            if nx < 0 || ny < 0 || nz < 0 || nx >= bx || ny >= by || nz >= bz {
                                continue;
                            }
                            let i = self.brick_index(nx, ny, nz);
                            if self.brick_dist[i] > d {
                                self.brick_dist[i] = d;
                                next.push((nx, ny, nz));
                            }
                        }
                    }
                }
            }
            frontier = next;
        }
    }

    #[inline]
    fn local(&self, p: VoxelPos) -> (i32, i32, i32) {
        (p.x - self.min.x, p.y - self.min.y, p.z - self.min.z)
    }

    #[inline]
    fn cell_index(&self, x: i32, y: i32, z: i32) -> usize {
        (x as usize) + self.dims[0] as usize * ((y as usize) + self.dims[1] as usize * z as usize)
    }

    #[inline]
    fn brick_index(&self, bx: i32, by: i32, bz: i32) -> usize {
        (bx as usize) + self.brick_dims[0] as usize * ((by as usize) + self.brick_dims[1] as usize * bz as usize)
    }

    pub fn min(&self) -> VoxelPos {
        self.min
    }

    /// Inclusive maximum corner.
    pub fn max(&self) -> VoxelPos {
        VoxelPos::new(self.min.x + self.dims[0] - 1, self.min.y + self.dims[1] - 1, self.min.z + self.dims[2] - 1)
    }

    #[inline]
    pub fn get(&self, p: VoxelPos) -> Option<VoxelId> {
        let (x, y, z) = self.local(p);
        if x < 0 || y < 0 || z < 0 || x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        let c = self.cells[self.cell_index(x, y, z)];
        (c != EMPTY).then_some(VoxelId(c))
    }

    /// Whether the brick containing `p` holds any voxel. Positions outside the
    /// grid report `false`.
    #[inline]
    pub fn brick_occupied(&self, p: VoxelPos) -> bool {
        self.empty_block(p).is_none()
    }

    /// The largest cube of bricks centred on `p`'s brick known to be empty,
    /// as (min corner, edge length) in grid units. None if `p`'s brick is
    /// occupied. Outside the grid the block is the single brick.
    #[inline]
    pub fn empty_block(&self, p: VoxelPos) -> Option<(VoxelPos, i32)> {
        let (x, y, z) = self.local(p);
        let origin = VoxelPos::new(
            self.min.x + (x >> BRICK_SHIFT << BRICK_SHIFT),
            self.min.y + (y >> BRICK_SHIFT << BRICK_SHIFT),
            self.min.z + (z >> BRICK_SHIFT << BRICK_SHIFT),
        );
        if x < 0 || y < 0 || z < 0 || x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return Some((origin, BRICK));
        }
        let d = self.brick_dist[self.brick_index(x >> BRICK_SHIFT, y >> BRICK_SHIFT, z >> BRICK_SHIFT)] as i32;
        if d == 0 {
            return None;
        }
        let r = (d - 1) * BRICK;
        Some((origin.offset(-r, -r, -r), (2 * d - 1) * BRICK))
    }
}
