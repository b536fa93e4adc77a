//! Seeded byte-level mutation of fixture files for the parser fuzz runs.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const XML_BITS: &[&str] = &[
    "<",
    ">",
    "/>",
    "</",
    "<testcase name=\"x\">",
    "</testcase>",
    "<failure/>",
    "<skipped/>",
    "tests=\"",
    "<class name=\"a/B\">",
    "</class>",
    "<counter type=\"LINE\" missed=\"1\" covered=\"2\"/>",
    "&amp;",
    "&#xFFFF;",
    "<![CDATA[",
    "]]>",
    "<!--",
    "-->",
    "\"",
    "=",
    "99999999999999999999",
    "<?xml version=\"1.0\"?>",
    "\u{0}",
];
pub const LCOV_BITS: &[&str] = &[
    "SF:",
    "end_of_record\n",
    "DA:1,",
    "BRDA:1,0,0,",
    "FNDA:",
    "LF:",
    "LH:",
    "\n",
    ",",
    "-",
    "18446744073709551615",
    "18446744073709551616",
    ":",
    "TN:\n",
    "\r\n",
];
pub const JAVA_BITS: &[&str] = &[
    "@Test",
    "void ",
    "(",
    ")",
    "{",
    "}",
    ";",
    "\"",
    "'",
    "/*",
    "*/",
    "//",
    "assertEquals(1, 2);",
    "class ",
    "\n",
    "@",
    ".",
    "<T>",
    "->",
    "\\",
    "record ",
    "static { }",
];

pub fn seeds(root: &Path) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".json"))
        .map(|p| std::fs::read(p).unwrap())
        .collect();
    out.sort();
    out
}

pub fn mutate(rng: &mut ChaCha8Rng, base: &[u8], bits: &[&str]) -> Vec<u8> {
    let mut v = base.to_vec();
    for _ in 0..rng.random_range(1..6) {
        let at = if v.is_empty() { 0 } else { rng.random_range(0..=v.len()) };
        match rng.random_range(0..6) {
            0 if !v.is_empty() => {
                let i = at.min(v.len() - 1);
                v[i] = rng.random();
            }
            1 => v.truncate(at),
            2 => {
                let end = rng.random_range(at..=v.len());
                v.drain(at..end);
            }
            3 if !v.is_empty() => {
                let start = rng.random_range(0..v.len());
                let end = rng.random_range(start..=v.len().min(start + 64));
                let chunk = v[start..end].to_vec();
                v.splice(at..at, chunk);
            }
            _ => {
                let bit = bits[rng.random_range(0..bits.len())].as_bytes();
                v.splice(at..at, bit.iter().copied());
            }
        }
    }
    v
}
