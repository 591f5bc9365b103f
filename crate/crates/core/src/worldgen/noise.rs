//! Seeded 2D/3D simplex noise.
//!
//! Follows the skewed-simplex gradient construction with a permutation table
//! shuffled from the seed. Output is scaled to lie within [-1, 1].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRAD3: [[f64; 3]; 12] = [
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [-1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [0.0, 1.0, -1.0],
    [0.0, -1.0, -1.0],
];

#[derive(Clone)]
pub struct SimplexNoise {
    perm: [u8; 512],
}

impl SimplexNoise {
    pub fn new(seed: u64) -> Self {
        let mut base: Vec<u8> = (0..=255u8).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        base.shuffle(&mut rng);
        let mut perm = [0u8; 512];
        for (i, p) in perm.iter_mut().enumerate() {
            *p = base[i & 255];
        }
        Self { perm }
    }

    #[inline]
    fn hash(&self, i: i64) -> usize {
        self.perm[(i & 255) as usize] as usize
    }

    pub fn noise2(&self, x: f64, y: f64) -> f64 {
        let f2 = 0.5 * (3f64.sqrt() - 1.0);
        let g2 = (3.0 - 3f64.sqrt()) / 6.0;
        let s = (x + y) * f2;
        let i = (x + s).floor();
        let j = (y + s).floor();
        let t = (i + j) * g2;
        let x0 = x - (i - t);
        let y0 = y - (j - t);
        let (i1, j1) = if x0 > y0 { (1, 0) } else { (0, 1) };
        let x1 = x0 - i1 as f64 + g2;
        let y1 = y0 - j1 as f64 + g2;
        let x2 = x0 - 1.0 + 2.0 * g2;
        let y2 = y0 - 1.0 + 2.0 * g2;
        let (ii, jj) = (i as i64, j as i64);
        let gi0 = self.hash(ii + self.hash(jj) as i64) % 12;
        let gi1 = self.hash(ii + i1 + self.hash(jj + j1) as i64) % 12;
        let gi2 = self.hash(ii + 1 + self.hash(jj + 1) as i64) % 12;
        let corner = |gi: usize, dx: f64, dy: f64| {
            let t = 0.5 - dx * dx - dy * dy;
            if t < 0.0 {
                0.0
            } else {
                let t2 = t * t;
                t2 * t2 * (GRAD3[gi][0] * dx + GRAD3[gi][1] * dy)
            }
        };
        let n = corner(gi0, x0, y0) + corner(gi1, x1, y1) + corner(gi2, x2, y2);
        (70.0 * n).clamp(-1.0, 1.0)
    }

    pub fn noise3(&self, x: f64, y: f64, z: f64) -> f64 {
        let f3 = 1.0 / 3.0;
        let g3 = 1.0 / 6.0;
        let s = (x + y + z) * f3;
        let i = (x + s).floor();
        let j = (y + s).floor();
        let k = (z + s).floor();
        let t = (i + j + k) * g3;
        let x0 = x - (i - t);
        let y0 = y - (j - t);
        let z0 = z - (k - t);
        let (i1, j1, k1, i2, j2, k2) = if x0 >= y0 {
            if y0 >= z0 {
                (1, 0, 0, 1, 1, 0)
            } else if x0 >= z0 {
                (1, 0, 0, 1, 0, 1)
            } else {
                (0, 0, 1, 1, 0, 1)
            }
        } else if y0 < z0 {
            (0, 0, 1, 0, 1, 1)
        } else if x0 < z0 {
            (0, 1, 0, 0, 1, 1)
        } else {
            (0, 1, 0, 1, 1, 0)
        };
        let offs = [
            (0i64, 0i64, 0i64, x0, y0, z0),
            (
                i1,
                j1,
                k1,
                x0 - i1 as f64 + g3,
                y0 - j1 as f64 + g3,
                z0 - k1 as f64 + g3,
            ),
            (
                i2,
                j2,
                k2,
                x0 - i2 as f64 + 2.0 * g3,
                y0 - j2 as f64 + 2.0 * g3,
                z0 - k2 as f64 + 2.0 * g3,
            ),
            (1, 1, 1, x0 - 1.0 + 3.0 * g3, y0 - 1.0 + 3.0 * g3, z0 - 1.0 + 3.0 * g3),
        ];
        let (ii, jj, kk) = (i as i64, j as i64, k as i64);
        let mut n = 0.0;
        for (di, dj, dk, dx, dy, dz) in offs {
            let gi = self.hash(ii + di + self.hash(jj + dj + self.hash(kk + dk) as i64) as i64) % 12;
            let t = 0.6 - dx * dx - dy * dy - dz * dz;
            if t >= 0.0 {
                let t2 = t * t;
                n += t2 * t2 * (GRAD3[gi][0] * dx + GRAD3[gi][1] * dy + GRAD3[gi][2] * dz);
            }
        }
        (32.0 * n).clamp(-1.0, 1.0)
    }
}
