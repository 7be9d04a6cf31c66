//! Programs shipped with the VM.
//!
//! Those defining a global `benchmarkRun` function can be used with `bbv bench`.

macro_rules! corpus {
    ($($name:literal),* $(,)?) => {
        const PROGRAMS: &[(&str, &str)] = &[$(($name, include_str!(concat!("../corpus/", $name)))),*];
    };
}

corpus!(
    "f.js",
    "accum.js",
    "tree-sum.js",
    "mixed-return.js",
    "megamorphic.js",
    "fib.js",
    "sieve.js",
    "strings.js",
    "points.js",
    "nbody.js",
);

/// `(file name, source)` of every corpus program.
pub fn all() -> impl Iterator<Item = (&'static str, &'static str)> {
    PROGRAMS.iter().copied()
}

pub fn get(name: &str) -> Option<&'static str> {
    PROGRAMS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}
