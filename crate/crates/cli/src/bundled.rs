//! Configurations shipped with the binary.

pub const BUNDLED: [(&str, &str); 10] = [
    ("r2_flat", include_str!("../configs/r2_flat.toml")),
    ("r2_kahler", include_str!("../configs/r2_kahler.toml")),
    ("r2_poisson_const", include_str!("../configs/r2_poisson_const.toml")),
    ("r2_poisson_x", include_str!("../configs/r2_poisson_x.toml")),
    ("r3_twisted", include_str!("../configs/r3_twisted.toml")),
    ("r4_symplectic", include_str!("../configs/r4_symplectic.toml")),
    ("r4_nonclosed", include_str!("../configs/r4_nonclosed.toml")),
    ("r2_tangent", include_str!("../configs/r2_tangent.toml")),
    ("r2_bivector", include_str!("../configs/r2_bivector.toml")),
    ("r4_almost_kahler", include_str!("../configs/r4_almost_kahler.toml")),
];

pub fn source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}
