//! Playing cards and seven-card poker hand ranking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CardError {
    #[error("unparseable card '{0}': expected rank then suit, e.g. As, Td, 2c")]
    Parse(String),
    #[error("duplicate card {0}")]
    Duplicate(Card),
    #[error("a hand needs 5 to 7 cards, got {0}")]
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suit {
    Clubs,
    Diamonds,
    Hearts,
    Spades,
}

impl Suit {
    pub const ALL: [Suit; 4] = [Suit::Clubs, Suit::Diamonds, Suit::Hearts, Suit::Spades];

    pub fn symbol(self) -> char {
        match self {
            Suit::Clubs => 'c',
            Suit::Diamonds => 'd',
            Suit::Hearts => 'h',
            Suit::Spades => 's',
        }
    }
}

/// A card; `rank` runs 2..=14 with the ace high.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Card {
    pub rank: u8,
    pub suit: Suit,
}

const RANKS: &str = "23456789TJQKA";

impl Card {
    pub fn new(rank: u8, suit: Suit) -> Self {
        assert!((2..=14).contains(&rank), "card rank out of range: {rank}");
        Card { rank, suit }
    }

    /// The 52-card deck in a fixed order.
    pub fn deck() -> Vec<Card> {
        Suit::ALL
            .iter()
            .flat_map(|&s| (2..=14).map(move |r| Card::new(r, s)))
            .collect()
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = RANKS.as_bytes()[(self.rank - 2) as usize] as char;
        write!(f, "{r}{}", self.suit.symbol())
    }
}

impl FromStr for Card {
    type Err = CardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CardError::Parse(s.to_string());
        let mut chars = s.trim().chars();
        let (Some(r), Some(su), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(bad());
        };
        let rank = RANKS.find(r.to_ascii_uppercase()).ok_or_else(bad)? as u8 + 2;
        let suit = match su.to_ascii_lowercase() {
            'c' => Suit::Clubs,
            'd' => Suit::Diamonds,
            'h' => Suit::Hearts,
            's' => Suit::Spades,
            _ => return Err(bad()),
        };
        Ok(Card { rank, suit })
    }
}

impl Serialize for Card {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Card {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn format_cards(cards: &[Card]) -> String {
    cards.iter().map(Card::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    HighCard,
    Pair,
    TwoPair,
    Trips,
    Straight,
    Flush,
    FullHouse,
    Quads,
    StraightFlush,
}

/// Category first, then the tiebreak ranks in order of significance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HandRank {
    pub category: Category,
    pub tiebreak: Vec<u8>,
}

/// High card of the best straight in a rank set, with the wheel as 5-high.
fn straight_high(present: &[bool; 15]) -> Option<u8> {
    (5..=14u8).rev().find(|&hi| {
        (0..5).all(|k| {
            let r = hi - k;
            present[if r == 1 { 14 } else { r as usize }]
        })
    })
}

/// Best five-card hand among 5 to 7 distinct cards.
pub fn poker_rank_hand(cards: &[Card]) -> Result<HandRank, CardError> {
    if !(5..=7).contains(&cards.len()) {
        return Err(CardError::Count(cards.len()));
    }
    for (i, c) in cards.iter().enumerate() {
        if cards[..i].contains(c) {
            return Err(CardError::Duplicate(*c));
        }
    }
    let rank = |category, tiebreak| Ok(HandRank { category, tiebreak });

    for suit in Suit::ALL {
        let mut suited: Vec<u8> = cards.iter().filter(|c| c.suit == suit).map(|c| c.rank).collect();
        if suited.len() >= 5 {
            let mut present = [false; 15];
            suited.iter().for_each(|&r| present[r as usize] = true);
            if let Some(hi) = straight_high(&present) {
                return rank(Category::StraightFlush, vec![hi]);
            }
            suited.sort_unstable_by(|a, b| b.cmp(a));
            suited.truncate(5);
            // seven cards cannot hold both a flush and a full house
            return rank(Category::Flush, suited);
        }
    }

    let groups = rank_groups(cards);
    let grouped = grouped_rank(&groups);
    if grouped.category >= Category::FullHouse {
        return Ok(grouped);
    }
    let mut present = [false; 15];
    cards.iter().for_each(|c| present[c.rank as usize] = true);
    if let Some(hi) = straight_high(&present) {
        return rank(Category::Straight, vec![hi]);
    }
    Ok(grouped)
}

/// (rank, count) sorted by count then rank, both descending.
fn rank_groups(cards: &[Card]) -> Vec<(u8, usize)> {
    let mut counts = [0usize; 15];
    cards.iter().for_each(|c| counts[c.rank as usize] += 1);
    let mut groups: Vec<(u8, usize)> = (2..=14u8)
        .filter(|&r| counts[r as usize] > 0)
        .map(|r| (r, counts[r as usize]))
        .collect();
    groups.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(b.0.cmp(&a.0)));
    groups
}

/// Best hand using rank multiplicities only (no straights or flushes).
fn grouped_rank(groups: &[(u8, usize)]) -> HandRank {
    let kickers = |exclude: &[u8], n: usize| -> Vec<u8> {
        let mut ks: Vec<u8> = groups.iter().map(|g| g.0).filter(|r| !exclude.contains(r)).collect();
        ks.sort_unstable_by(|a, b| b.cmp(a));
        ks.truncate(n);
        ks
    };
    let (top, top_n) = groups[0];
    let (category, tiebreak) = match top_n {
        4 => (Category::Quads, [vec![top], kickers(&[top], 1)].concat()),
        3 => match groups.iter().skip(1).filter(|g| g.1 >= 2).map(|g| g.0).max() {
            Some(pair) => (Category::FullHouse, vec![top, pair]),
            None => (Category::Trips, [vec![top], kickers(&[top], 2)].concat()),
        },
        2 if groups.get(1).is_some_and(|g| g.1 == 2) => {
            let second = groups[1].0;
            (Category::TwoPair, vec![top, second, kickers(&[top, second], 1)[0]])
        }
        2 => (Category::Pair, [vec![top], kickers(&[top], 3)].concat()),
        _ => (Category::HighCard, kickers(&[], 5)),
    };
    HandRank { category, tiebreak }
}
