//! Held-out evaluation mazes in two sizes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::Level;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteSize {
    /// 11x11 layouts.
    Desk,
    /// 15x15 layouts.
    Full,
}

impl SuiteSize {
    pub fn side(self) -> usize {
        match self {
            SuiteSize::Desk => 11,
            SuiteSize::Full => 15,
        }
    }
}

impl std::str::FromStr for SuiteSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" | "11" | "11x11" => Ok(SuiteSize::Desk),
            "full" | "15" | "15x15" => Ok(SuiteSize::Full),
            _ => Err(Error::Config(format!("unknown suite {s:?}"))),
        }
    }
}

pub const SUITE_NAMES: [&str; 6] = [
    "SixteenRooms",
    "FourRooms",
    "SimpleCrossing",
    "SmallCorridor",
    "Labyrinth",
    "Maze",
];

const SIXTEEN_ROOMS_11: [&str; 11] = [
    "###########",
    "#>........#",
    "#.#.##.##.#",
    "#.........#",
    "#.#..#..#.#",
    "#.#.##.##.#",
    "#.........#",
    "#.#..#..#.#",
    "#.#.##.##.#",
    "#........G#",
    "###########",
];

const FOUR_ROOMS_11: [&str; 11] = [
    "###########",
    "#>...#....#",
    "#.........#",
    "#....#....#",
    "#....#....#",
    "##.####.###",
    "#....#....#",
    "#.........#",
    "#....#....#",
    "#....#...G#",
    "###########",
];

const SIMPLE_CROSSING_11: [&str; 11] = [
    "###########",
    "#>.#...#..#",
    "#..#......#",
    "#..#...#..#",
    "#..#...#..#",
    "#..#...#..#",
    "#..#...#..#",
    "#..#...#..#",
    "#......#..#",
    "#..#...#.G#",
    "###########",
];

const SMALL_CORRIDOR_11: [&str; 11] = [
    "###########",
    "###########",
    "###########",
    "##>#.#.#G##",
    "##.#.#.#.##",
    "#.........#",
    "##.#.#.#.##",
    "##.#.#.#.##",
    "###########",
    "###########",
    "###########",
];

const LABYRINTH_11: [&str; 11] = [
    "###########",
    "#>........#",
    "#########.#",
    "#.......#.#",
    "#.#####.#.#",
    "#.#..G#.#.#",
    "#.#.###.#.#",
    "#.#.....#.#",
    "#.#######.#",
    "#.........#",
    "###########",
];

const MAZE_11: [&str; 11] = [
    "###########",
    "#>#.......#",
    "#.###.#####",
    "#...#.....#",
    "###.#.###.#",
    "#G#.#.#...#",
    "#.#.###.#.#",
    "#.#.....#.#",
    "#.#######.#",
    "#.........#",
    "###########",
];

const SIXTEEN_ROOMS_15: [&str; 15] = [
    "###############",
    "#>..#..#..#...#",
    "#.............#",
    "#...#..#..#...#",
    "##.##.##.###.##",
    "#.............#",
    "#...#..#..#...#",
    "##.##.##.###.##",
    "#.............#",
    "#...#..#..#...#",
    "##.##.##.###.##",
    "#...#..#..#...#",
    "#.............#",
    "#...#..#..#..G#",
    "###############",
];

const FOUR_ROOMS_15: [&str; 15] = [
    "###############",
    "#>.....#......#",
    "#......#......#",
    "#.............#",
    "#......#......#",
    "#......#......#",
    "#......#......#",
    "###.######.####",
    "#......#......#",
    "#......#......#",
    "#.............#",
    "#......#......#",
    "#......#......#",
    "#......#.....G#",
    "###############",
];

const SIMPLE_CROSSING_15: [&str; 15] = [
    "###############",
    "#>...#....#...#",
    "#....#........#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#....#....#...#",
    "#.........#...#",
    "#....#....#..G#",
    "###############",
];

const SMALL_CORRIDOR_15: [&str; 15] = [
    "###############",
    "###############",
    "###############",
    "###############",
    "###############",
    "##>#.#.#.#.#G##",
    "##.#.#.#.#.#.##",
    "#.............#",
    "##.#.#.#.#.#.##",
    "##.#.#.#.#.#.##",
    "###############",
    "###############",
    "###############",
    "###############",
    "###############",
];

const LABYRINTH_15: [&str; 15] = [
    "###############",
    "#>............#",
    "#############.#",
    "#...........#.#",
    "#.#########.#.#",
    "#.#.......#.#.#",
    "#.#.#####.#.#.#",
    "#.#.#..G#.#.#.#",
    "#.#.#.###.#.#.#",
    "#.#.#.....#.#.#",
    "#.#.#######.#.#",
    "#.#.........#.#",
    "#.###########.#",
    "#.............#",
    "###############",
];

const MAZE_15: [&str; 15] = [
    "###############",
    "#>#...........#",
    "#.###.#######.#",
    "#...#.......#.#",
    "###.#.#######.#",
    "#.#.#.#...#...#",
    "#.#.###.#.#.#.#",
    "#.#.....#...#.#",
    "#.###########.#",
    "#...........#.#",
    "#.#########.#.#",
    "#.#G..#.....#.#",
    "#.###.#.#####.#",
    "#.....#.......#",
    "###############",
];

fn layouts(size: SuiteSize) -> [&'static [&'static str]; 6] {
    match size {
        SuiteSize::Desk => [
            &SIXTEEN_ROOMS_11,
            &FOUR_ROOMS_11,
            &SIMPLE_CROSSING_11,
            &SMALL_CORRIDOR_11,
            &LABYRINTH_11,
            &MAZE_11,
        ],
        SuiteSize::Full => [
            &SIXTEEN_ROOMS_15,
            &FOUR_ROOMS_15,
            &SIMPLE_CROSSING_15,
            &SMALL_CORRIDOR_15,
            &LABYRINTH_15,
            &MAZE_15,
        ],
    }
}

/// The named held-out levels of the given size.
pub fn held_out_suite(size: SuiteSize) -> Vec<(String, Level)> {
    SUITE_NAMES
        .iter()
        .zip(layouts(size))
        .map(|(name, rows)| {
            let level = Level::from_ascii(rows).expect("built-in layout is valid");
            (name.to_string(), level)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURES: [(&str, &str); 12] = [
        (
            "11x11/SixteenRooms",
            include_str!("../fixtures/suite/11x11/SixteenRooms.json"),
        ),
        (
            "11x11/FourRooms",
            include_str!("../fixtures/suite/11x11/FourRooms.json"),
        ),
        (
            "11x11/SimpleCrossing",
            include_str!("../fixtures/suite/11x11/SimpleCrossing.json"),
        ),
        (
            "11x11/SmallCorridor",
            include_str!("../fixtures/suite/11x11/SmallCorridor.json"),
        ),
        (
            "11x11/Labyrinth",
            include_str!("../fixtures/suite/11x11/Labyrinth.json"),
        ),
        ("11x11/Maze", include_str!("../fixtures/suite/11x11/Maze.json")),
        (
            "15x15/SixteenRooms",
            include_str!("../fixtures/suite/15x15/SixteenRooms.json"),
        ),
        (
            "15x15/FourRooms",
            include_str!("../fixtures/suite/15x15/FourRooms.json"),
        ),
        (
            "15x15/SimpleCrossing",
            include_str!("../fixtures/suite/15x15/SimpleCrossing.json"),
        ),
        (
            "15x15/SmallCorridor",
            include_str!("../fixtures/suite/15x15/SmallCorridor.json"),
        ),
        (
            "15x15/Labyrinth",
            include_str!("../fixtures/suite/15x15/Labyrinth.json"),
        ),
        ("15x15/Maze", include_str!("../fixtures/suite/15x15/Maze.json")),
    ];

    #[test]
    fn every_layout_is_solvable() {
        for size in [SuiteSize::Desk, SuiteSize::Full] {
            for (name, level) in held_out_suite(size) {
                assert_eq!(level.width(), size.side(), "{name}");
                assert!(level.metrics().solvable, "{name}");
            }
        }
    }

    #[test]
    fn json_fixtures_match_layouts() {
        let mut levels = held_out_suite(SuiteSize::Desk);
        levels.extend(held_out_suite(SuiteSize::Full));
        for ((key, json), (name, level)) in FIXTURES.iter().zip(levels) {
            assert!(key.ends_with(&name));
            assert_eq!(Level::from_json(json).unwrap(), level, "{key}");
        }
    }
}
