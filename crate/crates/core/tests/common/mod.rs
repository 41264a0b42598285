//! Shared fixtures for the integration tests.
#![allow(dead_code)]

use instashap::indices::IndexFamily;

/// Printed Möbius coefficient tables: `(family, k, s, [c(t) for t = 1..=20])` as `(num, den)`.
/// Entries with `t < s` are printed as 0.
pub const PRINTED: &[(IndexFamily, u32, u32, [(i128, i128); 20])] = &[
    (IndexFamily::Sii, 1, 1, [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18), (1, 19), (1, 20)]),
    (IndexFamily::Sii, 2, 2, [(0, 1), (1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18), (1, 19)]),
    (IndexFamily::Sii, 3, 3, [(0, 1), (0, 1), (1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18)]),
    (IndexFamily::Taylor, 1, 1, [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18), (1, 19), (1, 20)]),
    (IndexFamily::Taylor, 2, 1, [(1, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1)]),
    (IndexFamily::Taylor, 2, 2, [(0, 1), (1, 1), (1, 3), (1, 6), (1, 10), (1, 15), (1, 21), (1, 28), (1, 36), (1, 45), (1, 55), (1, 66), (1, 78), (1, 91), (1, 105), (1, 120), (1, 136), (1, 153), (1, 171), (1, 190)]),
    (IndexFamily::Taylor, 3, 1, [(1, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1)]),
    (IndexFamily::Taylor, 3, 2, [(0, 1), (1, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1), (0, 1)]),
    (IndexFamily::Taylor, 3, 3, [(0, 1), (0, 1), (1, 1), (1, 4), (1, 10), (1, 20), (1, 35), (1, 56), (1, 84), (1, 120), (1, 165), (1, 220), (1, 286), (1, 364), (1, 455), (1, 560), (1, 680), (1, 816), (1, 969), (1, 1140)]),
    (IndexFamily::NShapley, 1, 1, [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18), (1, 19), (1, 20)]),
    (IndexFamily::NShapley, 2, 1, [(1, 1), (0, 1), (-1, 6), (-1, 4), (-3, 10), (-1, 3), (-5, 14), (-3, 8), (-7, 18), (-2, 5), (-9, 22), (-5, 12), (-11, 26), (-3, 7), (-13, 30), (-7, 16), (-15, 34), (-4, 9), (-17, 38), (-9, 20)]),
    (IndexFamily::NShapley, 2, 2, [(0, 1), (1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18), (1, 19)]),
    (IndexFamily::NShapley, 3, 1, [(1, 1), (0, 1), (0, 1), (0, 1), (1, 30), (1, 12), (1, 7), (5, 24), (5, 18), (7, 20), (14, 33), (1, 2), (15, 26), (55, 84), (11, 15), (13, 16), (91, 102), (35, 36), (20, 19), (17, 15)]),
    (IndexFamily::NShapley, 3, 2, [(0, 1), (1, 1), (0, 1), (-1, 6), (-1, 4), (-3, 10), (-1, 3), (-5, 14), (-3, 8), (-7, 18), (-2, 5), (-9, 22), (-5, 12), (-11, 26), (-3, 7), (-13, 30), (-7, 16), (-15, 34), (-4, 9), (-17, 38)]),
    (IndexFamily::NShapley, 3, 3, [(0, 1), (0, 1), (1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18)]),
    (IndexFamily::Faith, 1, 1, [(1, 1), (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 10), (1, 11), (1, 12), (1, 13), (1, 14), (1, 15), (1, 16), (1, 17), (1, 18), (1, 19), (1, 20)]),
    (IndexFamily::Faith, 2, 1, [(1, 1), (0, 1), (-1, 6), (-1, 5), (-1, 5), (-4, 21), (-5, 28), (-1, 6), (-7, 45), (-8, 55), (-3, 22), (-5, 39), (-11, 91), (-4, 35), (-13, 120), (-7, 68), (-5, 51), (-16, 171), (-17, 190), (-3, 35)]),
    (IndexFamily::Faith, 2, 2, [(0, 1), (1, 1), (1, 2), (3, 10), (1, 5), (1, 7), (3, 28), (1, 12), (1, 15), (3, 55), (1, 22), (1, 26), (3, 91), (1, 35), (1, 40), (3, 136), (1, 51), (1, 57), (3, 190), (1, 70)]),
    (IndexFamily::Faith, 3, 1, [(1, 1), (0, 1), (0, 1), (1, 20), (3, 35), (3, 28), (5, 42), (1, 8), (7, 55), (7, 55), (18, 143), (45, 364), (11, 91), (33, 280), (39, 340), (91, 816), (35, 323), (2, 19), (68, 665), (153, 1540)]),
    (IndexFamily::Faith, 3, 2, [(0, 1), (1, 1), (0, 1), (-1, 5), (-8, 35), (-3, 14), (-4, 21), (-1, 6), (-8, 55), (-7, 55), (-16, 143), (-9, 91), (-8, 91), (-11, 140), (-6, 85), (-13, 204), (-56, 969), (-1, 19), (-32, 665), (-17, 385)]),
    (IndexFamily::Faith, 3, 3, [(0, 1), (0, 1), (1, 1), (1, 2), (2, 7), (5, 28), (5, 42), (1, 12), (2, 33), (1, 22), (5, 143), (5, 182), (2, 91), (1, 56), (1, 68), (5, 408), (10, 969), (1, 114), (1, 133), (1, 154)]),
];
