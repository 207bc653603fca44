//! The genus-2 surface group, realized as the side-pairing group of the regular hyperbolic
//! octagon with interior angles π/4, together with free-group word arithmetic.
//!
//! Letters are `a, b, c, d` for the generators `a₁, b₁, a₂, b₂` and upper case for inverses.
//! The empty word is written `1`. A word `l₁l₂…lₙ` evaluates to the matrix product
//! `g(l₁)·g(l₂)···g(lₙ)`, so it acts on points right to left.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{LabError, Result};
use crate::geometry::{hyperbolic_distance, HyperbolicPoint, Isometry};

/// Number of sides of the fundamental polygon.
pub const SIDES: usize = 8;

/// Hard cap on word enumeration length.
pub const MAX_ENUMERATION_LEN: usize = 14;

const LETTER_CHARS: [char; 8] = ['a', 'A', 'b', 'B', 'c', 'C', 'd', 'D'];

/// A generator or inverse generator. The code is `2·generator + inverse`, which also fixes the
/// lexicographic order used for conjugacy keys: `a < A < b < B < c < C < d < D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

impl Letter {
    pub const ALL: [Letter; 8] = [
        Letter(0),
        Letter(1),
        Letter(2),
        Letter(3),
        Letter(4),
        Letter(5),
        Letter(6),
        Letter(7),
    ];

    pub fn new(generator: usize, inverse: bool) -> Self {
        assert!(generator < 4, "generator index {generator} out of range");
        Letter((2 * generator + inverse as usize) as u8)
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn generator(self) -> usize {
        (self.0 / 2) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn inverse(self) -> Letter {
        Letter(self.0 ^ 1)
    }

    pub fn to_char(self) -> char {
        LETTER_CHARS[self.code()]
    }

    pub fn from_char(c: char) -> Option<Letter> {
        LETTER_CHARS
            .iter()
            .position(|&x| x == c)
            .map(|i| Letter(i as u8))
    }
}

/// A freely reduced word in the generators.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Freely reduces the given letter sequence.
    pub fn from_letters(letters: impl IntoIterator<Item = Letter>) -> Self {
        let mut w = Word::empty();
        for l in letters {
            w.push(l);
        }
        w
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends a letter on the right, cancelling if it undoes the last one.
    pub fn push(&mut self, l: Letter) {
        if self.0.last() == Some(&l.inverse()) {
            self.0.pop();
        } else {
            self.0.push(l);
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut w = self.clone();
        for &l in &other.0 {
            w.push(l);
        }
        w
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn pow(&self, n: u32) -> Word {
        let mut w = Word::empty();
        for _ in 0..n {
            w = w.concat(self);
        }
        w
    }

    /// Strips matching letter/inverse pairs from the two ends.
    pub fn cyclically_reduced(&self) -> Word {
        let s = &self.0;
        let (mut i, mut j) = (0, s.len());
        while j >= i + 2 && s[i] == s[j - 1].inverse() {
            i += 1;
            j -= 1;
        }
        Word(s[i..j].to_vec())
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.0.len() < 2 || self.0[0] != self.0[self.0.len() - 1].inverse()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for l in &self.0 {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1" || s.is_empty() {
            return Ok(Word::empty());
        }
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            letters.push(
                Letter::from_char(c).ok_or_else(|| {
                    LabError::WordParse(format!("unknown letter '{c}' in \"{s}\""))
                })?,
            );
        }
        if letters.windows(2).any(|p| p[1] == p[0].inverse()) {
            return Err(LabError::WordParse(format!(
                "\"{s}\" is not freely reduced"
            )));
        }
        Ok(Word(letters))
    }
}

/// Canonical representative of a free-group conjugacy class: the lexicographically least
/// rotation of the cyclic reduction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConjugacyKey(Word);

impl ConjugacyKey {
    pub fn word(&self) -> &Word {
        &self.0
    }

    pub fn inverse(&self) -> ConjugacyKey {
        conjugacy_key(&self.0.inverse())
    }
}

impl fmt::Display for ConjugacyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn conjugacy_key(w: &Word) -> ConjugacyKey {
    let c = w.cyclically_reduced();
    let n = c.len();
    let s = c.letters();
    let best = (0..n)
        .min_by(|&i, &j| {
            (0..n)
                .map(|t| s[(i + t) % n])
                .cmp((0..n).map(|t| s[(j + t) % n]))
        })
        .unwrap_or(0);
    ConjugacyKey(Word((0..n).map(|t| s[(best + t) % n]).collect()))
}

/// The closed regular octagon centered at the origin.
#[derive(Clone, Debug)]
pub struct FundamentalDomain {
    pub vertices: [HyperbolicPoint; SIDES],
    /// Hyperbolic distance from the center to a vertex.
    pub circumradius: f64,
    /// Hyperbolic distance from the center to a side midpoint.
    pub inradius: f64,
    pub diameter: f64,
}

impl FundamentalDomain {
    fn regular(n: usize, interior_angle: f64) -> Self {
        // Right triangle (center, side midpoint, vertex) with angles π/n at the center and
        // half the interior angle at the vertex.
        let half_center = PI / n as f64;
        let half_vertex = 0.5 * interior_angle;
        let circumradius = (1.0 / (half_center.tan() * half_vertex.tan())).acosh();
        let inradius = (half_vertex.cos() / half_center.sin()).acosh();
        let vertices = std::array::from_fn(|j| {
            HyperbolicPoint::polar(circumradius, (2 * j + 1) as f64 * half_center)
        });
        let mut d = Self {
            vertices,
            circumradius,
            inradius,
            diameter: 0.0,
        };
        d.diameter = d.max_vertex_distance();
        d
    }

    fn max_vertex_distance(&self) -> f64 {
        let mut best: f64 = 0.0;
        for x in &self.vertices {
            for y in &self.vertices {
                best = best.max(hyperbolic_distance(*x, *y));
            }
        }
        best
    }

    /// Direction of the midpoint of side `j`.
    pub fn side_direction(j: usize) -> f64 {
        2.0 * PI * j as f64 / SIDES as f64
    }

    /// Samples each side geodesic at `per_side` points and returns all samples.
    pub fn boundary_samples(&self, per_side: usize) -> Vec<HyperbolicPoint> {
        let mut out = Vec::with_capacity(SIDES * per_side);
        for j in 0..SIDES {
            let v0 = self.vertices[(j + SIDES - 1) % SIDES];
            let v1 = self.vertices[j];
            let to0 = Isometry::moving_to_origin(v0);
            let w = to0.apply(v1).to_complex();
            let len = hyperbolic_distance(v0, v1);
            let back = to0.inverse();
            for i in 0..per_side {
                let r = len * i as f64 / per_side as f64;
                let p = HyperbolicPoint::polar(r, w.arg());
                out.push(back.apply(p));
            }
        }
        out
    }

    /// Diameter recomputed as the maximal distance between sampled boundary points.
    pub fn sampled_diameter(&self, per_side: usize) -> f64 {
        let pts = self.boundary_samples(per_side);
        let mut best: f64 = 0.0;
        for (i, x) in pts.iter().enumerate() {
            for y in &pts[i + 1..] {
                best = best.max(hyperbolic_distance(*x, *y));
            }
        }
        best
    }
}

/// Outcome of reducing a point into the fundamental domain.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub point: HyperbolicPoint,
    pub word: Word,
}

/// The surface group with its generators indexed by letter code.
#[derive(Clone, Debug)]
pub struct SurfaceGroup {
    generators: [Isometry; 8],
    relator: Word,
    domain: FundamentalDomain,
    /// `side_letter[j]` is the letter `l` with `l·D` adjacent to `D` across side `j`.
    side_letter: [Letter; SIDES],
    /// `l·o` for every letter code.
    translates: [HyperbolicPoint; 8],
    name: &'static str,
}

/// Distance from the origin beyond which domain reduction refuses to run.
pub const REDUCTION_DISTANCE_CAP: f64 = 30.0;

impl SurfaceGroup {
    /// The preset `genus2-octagon`.
    pub fn standard_genus2() -> Self {
        let domain = FundamentalDomain::regular(SIDES, PI / 4.0);
        let h = domain.inradius;
        // Isometry taking side j onto side k, with image of D adjacent to D across side k.
        let pair = |j: usize, k: usize| {
            Isometry::rotation(FundamentalDomain::side_direction(k))
                * Isometry::translation(2.0 * h)
                * Isometry::rotation(PI - FundamentalDomain::side_direction(j))
        };
        let mut generators = [Isometry::IDENTITY; 8];
        let mut side_letter = [Letter(0); SIDES];
        for i in 0..2 {
            let a = pair(4 * i + 2, 4 * i);
            let b = pair(4 * i + 1, 4 * i + 3);
            let la = Letter::new(2 * i, false);
            let lb = Letter::new(2 * i + 1, false);
            generators[la.code()] = a;
            generators[la.inverse().code()] = a.inverse();
            generators[lb.code()] = b;
            generators[lb.inverse().code()] = b.inverse();
            side_letter[4 * i] = la;
            side_letter[4 * i + 2] = la.inverse();
            side_letter[4 * i + 3] = lb;
            side_letter[4 * i + 1] = lb.inverse();
        }
        let translates = std::array::from_fn(|c| generators[c].apply(HyperbolicPoint::ORIGIN));
        let relator: Word = "abABcdCD".parse().expect("static relator");
        Self {
            generators,
            relator,
            domain,
            side_letter,
            translates,
            name: "genus2-octagon",
        }
    }

    pub fn from_preset(name: &str) -> Result<Self> {
        match name {
            "genus2-octagon" => Ok(Self::standard_genus2()),
            other => Err(LabError::Config(format!(
                "unknown group preset \"{other}\""
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn generator(&self, l: Letter) -> &Isometry {
        &self.generators[l.code()]
    }

    pub fn relator(&self) -> &Word {
        &self.relator
    }

    pub fn domain(&self) -> &FundamentalDomain {
        &self.domain
    }

    pub fn side_letter(&self, side: usize) -> Letter {
        self.side_letter[side]
    }

    /// `l·o` for the letter `l`.
    pub fn translate_of_origin(&self, l: Letter) -> HyperbolicPoint {
        self.translates[l.code()]
    }

    pub fn evaluate(&self, w: &Word) -> Isometry {
        w.letters()
            .iter()
            .fold(Isometry::IDENTITY, |acc, l| acc * self.generators[l.code()])
    }

    /// All freely reduced words of length at most `max_len`, by length and then letter order.
    pub fn enumerate_words(&self, max_len: usize) -> Result<WordIter> {
        if max_len > MAX_ENUMERATION_LEN {
            return Err(LabError::Guard {
                what: "max_word_len",
                value: max_len as f64,
                limit: MAX_ENUMERATION_LEN as f64,
            });
        }
        Ok(WordIter {
            max_len,
            current: None,
        })
    }

    /// Letter whose translate of the domain lies across the side `x` most violates, if any.
    ///
    /// `x` lies in the closed domain when `d(x, o) ≤ d(x, l·o) + tol` for every side letter.
    /// The comparison uses `cosh d(x, y) - 1 ∝ |x - y|²/(1 - |y|²)` with the common factor
    /// `2/(1 - |x|²)` removed.
    pub(crate) fn worst_side(&self, z: num_complex::Complex64, tol: f64) -> Option<Letter> {
        let r2 = z.norm_sqr();
        let mut best: Option<(f64, Letter)> = None;
        for &l in &self.side_letter {
            let y = self.translates[l.code()].to_complex();
            let excess = r2 - (z - y).norm_sqr() / (1.0 - y.norm_sqr());
            if excess > tol {
                match best {
                    Some((e, bl)) if e > excess || (e == excess && bl < l) => {}
                    _ => best = Some((excess, l)),
                }
            }
        }
        best.map(|(_, l)| l)
    }

    /// Returns `(x', w)` with `x = evaluate(w)·x'` and `x'` in the closed fundamental domain.
    pub fn reduce_to_domain(&self, x: HyperbolicPoint) -> Result<Reduced> {
        let start = hyperbolic_distance(HyperbolicPoint::ORIGIN, x);
        if start > REDUCTION_DISTANCE_CAP {
            return Err(LabError::DomainEscape {
                steps: 0,
                distance: start,
            });
        }
        let mut z = x.to_complex();
        let mut word = Word::empty();
        let max_steps = 64 + 8 * start.ceil() as usize;
        for _ in 0..max_steps {
            match self.worst_side(z, 1e-13) {
                None => {
                    return Ok(Reduced {
                        point: HyperbolicPoint::from_complex(z),
                        word,
                    })
                }
                Some(l) => {
                    word.push(l);
                    z = self.generators[l.inverse().code()].apply_complex(z);
                }
            }
        }
        Err(LabError::DomainEscape {
            steps: max_steps,
            distance: start,
        })
    }

    /// Whether `x` lies in the domain inflated by `tol` (in the `cosh` proxy).
    pub fn in_domain(&self, x: HyperbolicPoint, tol: f64) -> bool {
        self.worst_side(x.to_complex(), tol).is_none()
    }
}

/// Odometer over freely reduced words.
pub struct WordIter {
    max_len: usize,
    current: Option<Vec<u8>>,
}

impl WordIter {
    fn first_of_len(n: usize) -> Vec<u8> {
        vec![0; n]
    }

    fn valid_after(prev: Option<u8>, c: u8) -> bool {
        prev != Some(c ^ 1)
    }
}

impl Iterator for WordIter {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let next = match self.current.take() {
            None => Some(Vec::new()),
            Some(mut cur) => {
                let n = cur.len();
                let mut pos = n;
                let mut advanced = false;
                while pos > 0 {
                    pos -= 1;
                    let prev = if pos == 0 { None } else { Some(cur[pos - 1]) };
                    let mut c = cur[pos] + 1;
                    while c < 8 && !Self::valid_after(prev, c) {
                        c += 1;
                    }
                    if c < 8 {
                        cur[pos] = c;
                        for i in pos + 1..n {
                            let p = cur[i - 1];
                            cur[i] = (0..8).find(|&c| Self::valid_after(Some(p), c)).unwrap();
                        }
                        advanced = true;
                        break;
                    }
                }
                if advanced {
                    Some(cur)
                } else if n < self.max_len {
                    Some(Self::first_of_len(n + 1))
                } else {
                    None
                }
            }
        };
        let cur = next?;
        let w = Word(cur.iter().map(|&c| Letter(c)).collect());
        self.current = Some(cur);
        Some(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_and_fixed_points, IsometryClass};
    use std::collections::HashSet;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn octagon_constants() {
        let g = SurfaceGroup::standard_genus2();
        let d = g.domain();
        assert!((d.circumradius - 2.4484524476780756).abs() < 1e-12);
        assert!((d.inradius - 1.5285709194809982).abs() < 1e-12);
        assert!((d.diameter - 2.0 * d.circumradius).abs() < 1e-12);
    }

    #[test]
    fn interior_angles_sum_to_two_pi() {
        let d = SurfaceGroup::standard_genus2().domain;
        let mut sum = 0.0;
        for j in 0..SIDES {
            let v = d.vertices[j];
            let to0 = Isometry::moving_to_origin(v);
            let p = to0.apply(d.vertices[(j + SIDES - 1) % SIDES]).to_complex();
            let q = to0.apply(d.vertices[(j + 1) % SIDES]).to_complex();
            sum += (q / p).arg().abs();
        }
        assert!((sum - 2.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn relator_is_identity() {
        let g = SurfaceGroup::standard_genus2();
        assert!(g.evaluate(g.relator()).is_identity(1e-8));
        assert!(g.evaluate(&Word::empty()).is_identity(0.0));
    }

    #[test]
    fn generators_pair_sides_and_agree_in_length() {
        let g = SurfaceGroup::standard_genus2();
        let h = g.domain().inradius;
        for j in 0..SIDES {
            let l = g.side_letter(j);
            let img = g.generator(l).apply(HyperbolicPoint::ORIGIN);
            let expected = HyperbolicPoint::polar(2.0 * h, FundamentalDomain::side_direction(j));
            assert!(
                (img.to_complex() - expected.to_complex()).norm() < 1e-12,
                "side {j}"
            );
        }
        let lengths: Vec<f64> = Letter::ALL
            .iter()
            .map(|&l| {
                let c = classify_and_fixed_points(g.generator(l));
                assert_eq!(c.class, IsometryClass::Hyperbolic);
                c.translation_length
            })
            .collect();
        for len in &lengths {
            assert!((len - lengths[0]).abs() < 1e-10);
        }
        // Vertices map to vertices under the side pairings.
        let verts = g.domain().vertices;
        for &l in &Letter::ALL {
            for v in verts {
                let img = g.generator(l).apply(v);
                let hits = (0..8)
                    .flat_map(|s| {
                        let m = g.generator(g.side_letter(s));
                        verts.iter().map(move |u| m.apply(*u))
                    })
                    .chain(verts.iter().copied())
                    .any(|u| hyperbolic_distance(u, img) < 1e-8);
                assert!(hits);
            }
        }
    }

    #[test]
    fn word_parse_and_display() {
        assert_eq!(w("aBcD").to_string(), "aBcD");
        assert_eq!(w("1"), Word::empty());
        assert!("aA".parse::<Word>().is_err());
        assert!("x".parse::<Word>().is_err());
        assert_eq!(w("ab").concat(&w("BA")), Word::empty());
        assert_eq!(w("ab").inverse(), w("BA"));
    }

    #[test]
    fn evaluate_inverse_pairs() {
        let g = SurfaceGroup::standard_genus2();
        for word in g.enumerate_words(3).unwrap() {
            let m = g.evaluate(&word) * g.evaluate(&word.inverse());
            assert!(m.is_identity(1e-10));
        }
    }

    #[test]
    fn enumeration_counts() {
        let g = SurfaceGroup::standard_genus2();
        let count = |n| g.enumerate_words(n).unwrap().count();
        assert_eq!(count(0), 1);
        assert_eq!(count(1), 9);
        assert_eq!(count(2), 1 + 8 + 56);
        let all: Vec<Word> = g.enumerate_words(4).unwrap().collect();
        assert_eq!(all.len(), 1 + 8 + 56 + 392 + 2744);
        let set: HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), all.len());
        assert!(all
            .iter()
            .all(|x| Word::from_letters(x.letters().iter().copied()) == *x));
        assert!(g.enumerate_words(15).is_err());
    }

    #[test]
    fn conjugacy_keys() {
        assert_eq!(conjugacy_key(&w("ab")), conjugacy_key(&w("ba")));
        assert_eq!(conjugacy_key(&w("cabC")), conjugacy_key(&w("ab")));
        assert_ne!(conjugacy_key(&w("ab")), conjugacy_key(&w("BA")));
        assert_eq!(conjugacy_key(&w("ab")).inverse(), conjugacy_key(&w("BA")));
        assert_eq!(conjugacy_key(&w("bA")).word(), &w("Ab"));
    }

    #[test]
    fn reduce_examples() {
        let g = SurfaceGroup::standard_genus2();
        let x = HyperbolicPoint::new(0.1, -0.2).unwrap();
        let r = g.reduce_to_domain(x).unwrap();
        assert!(r.word.is_empty());
        for &l in &Letter::ALL {
            let r = g
                .reduce_to_domain(g.generator(l).apply(HyperbolicPoint::ORIGIN))
                .unwrap();
            assert_eq!(r.word, Word::letter(l));
            assert!(r.point.norm_sqr() < 1e-20);
        }
        let far = HyperbolicPoint::polar(40.0, 0.3);
        assert!(matches!(
            g.reduce_to_domain(far),
            Err(LabError::DomainEscape { .. })
        ));
    }

    #[test]
    fn diameter_is_stable_under_resampling() {
        let d = SurfaceGroup::standard_genus2().domain;
        let a = d.sampled_diameter(16);
        let b = d.sampled_diameter(32);
        assert!((a - b).abs() < 1e-6);
        assert!((a - d.diameter).abs() < 1e-6);
    }

    #[test]
    fn short_words_are_hyperbolic() {
        let g = SurfaceGroup::standard_genus2();
        for word in g.enumerate_words(6).unwrap().skip(1) {
            if !word.is_cyclically_reduced() {
                continue;
            }
            let c = classify_and_fixed_points(&g.evaluate(&word));
            assert_eq!(c.class, IsometryClass::Hyperbolic, "{word}");
        }
    }
}
