//! Planar polygon primitives used for adjacency, centroids and areal weighting.
//!
//! Coordinates are assumed to be in a projected plane (meters). Rings are
//! stored open: the closing vertex of GeoJSON rings is dropped on input.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn empty() -> Self {
        BoundingBox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn extend(&mut self, p: &Point) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn merge(&mut self, other: &BoundingBox) {
        self.min_x = self.min_x.min(other.min_x);
        self.min_y = self.min_y.min(other.min_y);
        self.max_x = self.max_x.max(other.max_x);
        self.max_y = self.max_y.max(other.max_y);
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }
}

/// A simple polygon with optional holes.
#[derive(Clone, Debug, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Point>) -> Self {
        Polygon {
            exterior: open_ring(exterior),
            holes: Vec::new(),
        }
    }

    pub fn with_holes(exterior: Vec<Point>, holes: Vec<Vec<Point>>) -> Self {
        Polygon {
            exterior: open_ring(exterior),
            holes: holes.into_iter().map(open_ring).collect(),
        }
    }

    /// Axis-aligned rectangle, counter-clockwise.
    pub fn rectangle(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Polygon::new(vec![
            Point::new(min_x, min_y),
            Point::new(max_x, min_y),
            Point::new(max_x, max_y),
            Point::new(min_x, max_y),
        ])
    }

    pub fn rings(&self) -> impl Iterator<Item = &[Point]> {
        std::iter::once(self.exterior.as_slice()).chain(self.holes.iter().map(Vec::as_slice))
    }

    pub fn area(&self) -> f64 {
        let holes: f64 = self.holes.iter().map(|h| ring_signed_area(h).abs()).sum();
        ring_signed_area(&self.exterior).abs() - holes
    }

    /// Area-weighted centroid and area of the polygon (holes subtracted).
    fn moments(&self) -> (f64, f64, f64) {
        let (a, cx, cy) = ring_moments(&self.exterior);
        let (mut area, mut mx, mut my) = (a.abs(), cx * a.abs(), cy * a.abs());
        for hole in &self.holes {
            let (ha, hx, hy) = ring_moments(hole);
            let ha = ha.abs();
            area -= ha;
            mx -= hx * ha;
            my -= hy * ha;
        }
        (area, mx, my)
    }

    pub fn contains(&self, p: &Point) -> bool {
        ring_contains(&self.exterior, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut bb = BoundingBox::empty();
        for p in &self.exterior {
            bb.extend(p);
        }
        bb
    }
}

/// A collection of polygons describing one node's footprint.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiPolygon {
    pub parts: Vec<Polygon>,
}

impl From<Polygon> for MultiPolygon {
    fn from(p: Polygon) -> Self {
        MultiPolygon { parts: vec![p] }
    }
}

impl MultiPolygon {
    pub fn new(parts: Vec<Polygon>) -> Self {
        MultiPolygon { parts }
    }

    pub fn area(&self) -> f64 {
        self.parts.iter().map(Polygon::area).sum()
    }

    pub fn centroid(&self) -> Point {
        let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
        for part in &self.parts {
            let (a, x, y) = part.moments();
            area += a;
            mx += x;
            my += y;
        }
        Point::new(mx / area, my / area)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.parts.iter().any(|part| part.contains(p))
    }

    pub fn bbox(&self) -> BoundingBox {
        let mut bb = BoundingBox::empty();
        for part in &self.parts {
            bb.merge(&part.bbox());
        }
        bb
    }

    /// Every boundary segment, holes included.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.parts
            .iter()
            .flat_map(|p| p.rings())
            .flat_map(|ring| (0..ring.len()).map(move |k| (ring[k], ring[(k + 1) % ring.len()])))
    }

    /// Rejects empty parts, non-finite coordinates and zero-area rings.
    pub fn validate(&self, id: &str) -> Result<()> {
        let invalid = |reason: &str| Error::InvalidGeometry {
            id: id.to_string(),
            reason: reason.to_string(),
        };
        if self.parts.is_empty() {
            return Err(invalid("empty geometry"));
        }
        for part in &self.parts {
            for ring in part.rings() {
                if ring.len() < 3 {
                    return Err(invalid("ring has fewer than three distinct vertices"));
                }
                if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
                    return Err(invalid("non-finite coordinate"));
                }
            }
            if ring_signed_area(&part.exterior).abs() <= 0.0 {
                return Err(invalid("exterior ring has zero area"));
            }
            if part.area() <= 0.0 {
                return Err(invalid("holes cover the whole exterior"));
            }
        }
        Ok(())
    }
}

fn open_ring(mut ring: Vec<Point>) -> Vec<Point> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

pub fn ring_signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n == 0 {
        return 0.0;
    }
    let o = ring[0];
    let mut acc = 0.0;
    for k in 0..n {
        let (p, q) = (ring[k], ring[(k + 1) % n]);
        acc += (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y);
    }
    acc / 2.0
}

/// Signed area and centroid of a ring. Coordinates are shifted to the first
/// vertex so large projected offsets do not cancel catastrophically.
fn ring_moments(ring: &[Point]) -> (f64, f64, f64) {
    let n = ring.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let o = ring[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for k in 0..n {
        let (p, q) = (ring[k], ring[(k + 1) % n]);
        let (px, py, qx, qy) = (p.x - o.x, p.y - o.y, q.x - o.x, q.y - o.y);
        let cross = px * qy - qx * py;
        a2 += cross;
        cx += (px + qx) * cross;
        cy += (py + qy) * cross;
    }
    if a2 == 0.0 {
        return (0.0, o.x, o.y);
    }
    let area = a2 / 2.0;
    (area, cx / (3.0 * a2) + o.x, cy / (3.0 * a2) + o.y)
}

/// Even-odd ray casting.
fn ring_contains(ring: &[Point], p: &Point) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Sutherland-Hodgman clip of `subject` against a convex `clip` ring.
///
/// The result may contain degenerate zero-width bridges when the subject is
/// concave, which do not affect its area.
pub fn clip_to_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let ccw = ring_signed_area(clip) >= 0.0;
    let mut output: Vec<Point> = subject.to_vec();
    let m = clip.len();
    for k in 0..m {
        if output.is_empty() {
            break;
        }
        let (a, b) = (clip[k], clip[(k + 1) % m]);
        let inside = |p: &Point| {
            let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
            if ccw {
                cross >= 0.0
            } else {
                cross <= 0.0
            }
        };
        let input = std::mem::take(&mut output);
        let len = input.len();
        for i in 0..len {
            let cur = input[i];
            let prev = input[(i + len - 1) % len];
            let (cur_in, prev_in) = (inside(&cur), inside(&prev));
            if cur_in {
                if !prev_in {
                    output.push(line_intersection(prev, cur, a, b));
                }
                output.push(cur);
            } else if prev_in {
                output.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    output
}

fn line_intersection(p: Point, q: Point, a: Point, b: Point) -> Point {
    let (dx, dy) = (q.x - p.x, q.y - p.y);
    let (ex, ey) = (b.x - a.x, b.y - a.y);
    let denom = dx * ey - dy * ex;
    if denom == 0.0 {
        return q;
    }
    let t = ((a.x - p.x) * ey - (a.y - p.y) * ex) / denom;
    Point::new(p.x + t * dx, p.y + t * dy)
}

/// Area of the intersection between a polygon (holes honoured) and a convex ring.
pub fn intersection_area(poly: &MultiPolygon, convex: &[Point]) -> f64 {
    poly.parts
        .iter()
        .map(|part| {
            let outer = ring_signed_area(&clip_to_convex(&part.exterior, convex)).abs();
            let holes: f64 = part
                .holes
                .iter()
                .map(|h| ring_signed_area(&clip_to_convex(h, convex)).abs())
                .sum();
            (outer - holes).max(0.0)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(x: f64, y: f64) -> Polygon {
        Polygon::rectangle(x, y, x + 1.0, y + 1.0)
    }

    #[test]
    fn square_area_and_centroid() {
        let mp = MultiPolygon::from(unit_square(2.0, 3.0));
        assert!((mp.area() - 1.0).abs() < 1e-12);
        let c = mp.centroid();
        assert!((c.x - 2.5).abs() < 1e-12 && (c.y - 3.5).abs() < 1e-12);
    }

    #[test]
    fn hole_reduces_area_and_membership() {
        let outer = Polygon::rectangle(0.0, 0.0, 4.0, 4.0).exterior;
        let hole = Polygon::rectangle(1.0, 1.0, 2.0, 2.0).exterior;
        let mp = MultiPolygon::from(Polygon::with_holes(outer, vec![hole]));
        assert!((mp.area() - 15.0).abs() < 1e-12);
        assert!(!mp.contains(&Point::new(1.5, 1.5)));
        assert!(mp.contains(&Point::new(3.0, 3.0)));
    }

    #[test]
    fn closing_vertex_is_dropped() {
        let p = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(0.0, 0.0),
        ]);
        assert_eq!(p.exterior.len(), 3);
    }

    #[test]
    fn degenerate_rings_rejected() {
        let line = MultiPolygon::from(Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0),
        ]));
        assert!(matches!(line.validate("a"), Err(Error::InvalidGeometry { .. })));
        assert!(MultiPolygon::new(vec![]).validate("b").is_err());
    }

    #[test]
    fn clipping_overlap_area() {
        let a = MultiPolygon::from(Polygon::rectangle(0.0, 0.0, 2.0, 2.0));
        let window = Polygon::rectangle(1.0, 1.0, 3.0, 3.0).exterior;
        assert!((intersection_area(&a, &window) - 1.0).abs() < 1e-12);
        let far = Polygon::rectangle(5.0, 5.0, 6.0, 6.0).exterior;
        assert!(intersection_area(&a, &far).abs() < 1e-12);
    }

    #[test]
    fn concave_clip_area() {
        // L-shape of area 3 clipped by a window covering its right column.
        let l = MultiPolygon::from(Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ]));
        assert!((l.area() - 3.0).abs() < 1e-12);
        let window = Polygon::rectangle(0.5, -1.0, 3.0, 3.0).exterior;
        assert!((intersection_area(&l, &window) - 2.0).abs() < 1e-12);
    }
}
