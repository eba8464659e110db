/// Independent random streams inside one trial world.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Arrivals = 1,
    Driver = 2,
    Placement = 3,
    TaggedSetup = 4,
    TaggedRoute = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `base` with a path of labels into a well-spread 64-bit seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(base), |h, &p| {
        splitmix64(h ^ splitmix64(p.wrapping_add(0x632b_e59b_d9b4_e019)))
    })
}

/// Seed of the world shared by every strategy at `(fleet_size, trial)`.
pub fn world_seed(base: u64, fleet_size: usize, trial: usize) -> u64 {
    derive_seed(base, &[fleet_size as u64, trial as u64])
}
