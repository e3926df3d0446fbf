//! Standard Algebraic Notation.

use std::sync::OnceLock;

use regex::Regex;

use super::position::{file_of, parse_square, rank_of, square_name, Move, PieceKind, Position};
use super::ChessError;

/// SAN for a legal move, including disambiguation and check/mate suffix.
pub fn to_san(pos: &Position, mv: &Move) -> String {
    let mut san = san_body(pos, mv, &pos.legal_moves());
    let next = pos.make_move(mv);
    if next.in_check(next.side) {
        san.push(if next.legal_moves().is_empty() { '#' } else { '+' });
    }
    san
}

/// SAN of every legal move, computed with one shared move list.
pub fn all_san(pos: &Position) -> Vec<(Move, String)> {
    let legal = pos.legal_moves();
    legal
        .iter()
        .map(|mv| {
            let mut san = san_body(pos, mv, &legal);
            let next = pos.make_move(mv);
            if next.in_check(next.side) {
                san.push(if next.legal_moves().is_empty() { '#' } else { '+' });
            }
            (*mv, san)
        })
        .collect()
}

fn san_body(pos: &Position, mv: &Move, legal: &[Move]) -> String {
    if pos.is_castle(mv) {
        return if file_of(mv.to) == 6 { "O-O" } else { "O-O-O" }.to_string();
    }
    let piece = pos.piece_at(mv.from).expect("legal move has a piece").kind;
    let capture = pos.is_capture(mv);
    let mut san = String::new();
    if piece == PieceKind::Pawn {
        if capture {
            san.push((b'a' + file_of(mv.from) as u8) as char);
        }
    } else {
        san.push(piece.letter());
        let rivals: Vec<&Move> = legal
            .iter()
            .filter(|m| {
                m.to == mv.to
                    && m.from != mv.from
                    && pos.piece_at(m.from).map(|p| p.kind) == Some(piece)
            })
            .collect();
        if !rivals.is_empty() {
            let from = square_name(mv.from);
            if rivals.iter().all(|m| file_of(m.from) != file_of(mv.from)) {
                san.push_str(&from[..1]);
            } else if rivals.iter().all(|m| rank_of(m.from) != rank_of(mv.from)) {
                san.push_str(&from[1..]);
            } else {
                san.push_str(&from);
            }
        }
    }
    if capture {
        san.push('x');
    }
    san.push_str(&square_name(mv.to));
    if let Some(p) = mv.promotion {
        san.push('=');
        san.push(p.letter());
    }
    san
}

fn san_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([NBRQK])?([a-h])?([1-8])?[x:]?([a-h][1-8])(?:=?([NBRQnbrq]))?(?:e\.?p\.?)?$")
            .expect("valid SAN regex")
    })
}

fn coord_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^([a-h][1-8])[-x]?([a-h][1-8])=?([nbrqNBRQ])?$").expect("valid coordinate regex")
    })
}

#[derive(Debug, Clone, PartialEq)]
struct Pattern {
    piece: PieceKind,
    from_file: Option<i8>,
    from_rank: Option<i8>,
    from: Option<u8>,
    to: u8,
    promotion: Option<PieceKind>,
    castle: Option<bool>,
}

impl Pattern {
    fn matches(&self, pos: &Position, mv: &Move) -> bool {
        let Some(piece) = pos.piece_at(mv.from) else {
            return false;
        };
        if let Some(kingside) = self.castle {
            return pos.is_castle(mv) && (file_of(mv.to) == 6) == kingside;
        }
        if mv.to != self.to {
            return false;
        }
        match self.from {
            // coordinate notation names the squares, not the piece
            Some(from) if from != mv.from => return false,
            Some(_) => {}
            None if piece.kind != self.piece => return false,
            None => {}
        }
        if self.from_file.is_some_and(|f| f != file_of(mv.from))
            || self.from_rank.is_some_and(|r| r != rank_of(mv.from))
        {
            return false;
        }
        match (self.promotion, mv.promotion) {
            (Some(a), Some(b)) => a == b,
            (None, Some(b)) => b == PieceKind::Queen,
            (Some(_), None) => false,
            (None, None) => true,
        }
    }
}

fn pattern_of(text: &str) -> Option<Pattern> {
    let castle = match text.replace('0', "O").to_ascii_uppercase().as_str() {
        "O-O" | "OO" => Some(true),
        "O-O-O" | "OOO" => Some(false),
        _ => None,
    };
    if castle.is_some() {
        return Some(Pattern {
            piece: PieceKind::King,
            from_file: None,
            from_rank: None,
            from: None,
            to: 0,
            promotion: None,
            castle,
        });
    }
    if let Some(c) = coord_regex().captures(text) {
        return Some(Pattern {
            piece: PieceKind::Pawn,
            from_file: None,
            from_rank: None,
            from: parse_square(&c[1]),
            to: parse_square(&c[2])?,
            promotion: c.get(3).and_then(|m| PieceKind::from_letter(m.as_str().chars().next()?)),
            castle: None,
        });
    }
    let c = san_regex().captures(text)?;
    Some(Pattern {
        piece: c
            .get(1)
            .and_then(|m| PieceKind::from_letter(m.as_str().chars().next()?))
            .unwrap_or(PieceKind::Pawn),
        from_file: c.get(2).map(|m| (m.as_str().as_bytes()[0] - b'a') as i8),
        from_rank: c.get(3).map(|m| (m.as_str().as_bytes()[0] - b'1') as i8),
        from: None,
        to: parse_square(&c[4])?,
        promotion: c
            .get(5)
            .and_then(|m| PieceKind::from_letter(m.as_str().chars().next()?)),
        castle: None,
    })
}

/// Resolve move text (SAN, or coordinates like `e2e4`) against `pos`.
pub fn parse_move(pos: &Position, input: &str) -> Result<Move, ChessError> {
    let trimmed = input.trim().trim_end_matches(['!', '?', '.']);
    let (body, claim) = match trimmed.strip_suffix('#') {
        Some(b) => (b, Some('#')),
        None => match trimmed.strip_suffix('+') {
            Some(b) => (b.trim_end_matches('+'), Some('+')),
            None => (trimmed, None),
        },
    };
    let unparseable = || ChessError::Unparseable(input.trim().to_string());
    let pattern = pattern_of(body.trim()).ok_or_else(unparseable)?;

    let legal = pos.legal_moves();
    let mut candidates: Vec<Move> = legal
        .iter()
        .copied()
        .filter(|m| pattern.matches(pos, m))
        .collect();
    candidates.dedup();

    match candidates.len() {
        0 => Err(explain_illegal(pos, &pattern, input.trim())),
        1 => {
            let mv = candidates[0];
            if let Some(c) = claim {
                let next = pos.make_move(&mv);
                let check = next.in_check(next.side);
                let mate = check && next.legal_moves().is_empty();
                if (c == '+' && !check) || (c == '#' && !mate) {
                    return Err(ChessError::BadAnnotation {
                        san: input.trim().to_string(),
                        claimed: if c == '#' { "checkmate" } else { "check" },
                    });
                }
            }
            Ok(mv)
        }
        _ => {
            let mut names: Vec<String> = candidates.iter().map(|m| to_san(pos, m)).collect();
            names.sort();
            Err(ChessError::Ambiguous {
                san: input.trim().to_string(),
                candidates: names,
            })
        }
    }
}

fn explain_illegal(pos: &Position, pattern: &Pattern, input: &str) -> ChessError {
    let pseudo = pos.pseudo_legal_moves();
    let matches_pattern = |p: &Position, m: &Move| pattern.matches(p, m);
    if pseudo.iter().any(|m| matches_pattern(pos, m)) {
        return ChessError::Illegal {
            san: input.to_string(),
            detail: "it would leave the king in check".into(),
        };
    }
    let other = pos.with_side(pos.side.flip());
    if other
        .pseudo_legal_moves()
        .iter()
        .any(|m| matches_pattern(&other, m))
    {
        return ChessError::Illegal {
            san: input.to_string(),
            detail: format!("it is {} to move", pos.side.name()),
        };
    }
    ChessError::Illegal {
        san: input.to_string(),
        detail: "no such move is available in this position".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(fen: &str) -> Position {
        Position::from_fen(fen).unwrap()
    }

    #[test]
    fn disambiguates_by_file_then_rank() {
        let p = pos("4k3/8/8/R7/8/8/4K3/R6R w - - 0 1");
        let sans: Vec<String> = all_san(&p).into_iter().map(|(_, s)| s).collect();
        assert!(sans.contains(&"R1a3".to_string()));
        assert!(sans.contains(&"R5a3".to_string()));
        assert!(sans.contains(&"Rad1".to_string()));
        assert!(sans.contains(&"Rhd1".to_string()));
    }

    #[test]
    fn ambiguous_input_lists_candidates() {
        let p = pos("4k3/8/8/8/8/8/8/1N2KN2 w - - 0 1");
        match parse_move(&p, "Nd2") {
            Err(ChessError::Ambiguous { candidates, .. }) => {
                assert_eq!(candidates, vec!["Nbd2".to_string(), "Nfd2".to_string()])
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_move(&p, "Nbd2").is_ok());
    }

    #[test]
    fn pinned_piece_and_wrong_side_messages() {
        let p = pos("4k3/4r3/8/8/8/8/4B3/4K3 w - - 0 1");
        let err = parse_move(&p, "Bd3").unwrap_err().to_string();
        assert!(err.contains("illegal move") && err.contains("king in check"), "{err}");
        let start = Position::start();
        let err = parse_move(&start, "e5").unwrap_err().to_string();
        assert!(err.contains("white to move"), "{err}");
    }

    #[test]
    fn coordinate_and_castling_variants() {
        let start = Position::start();
        let a = parse_move(&start, "e2e4").unwrap();
        let b = parse_move(&start, "e4").unwrap();
        assert_eq!(a, b);
        let p = pos("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1");
        assert_eq!(to_san(&p, &parse_move(&p, "0-0").unwrap()), "O-O");
        assert_eq!(to_san(&p, &parse_move(&p, "O-O-O").unwrap()), "O-O-O");
    }

    #[test]
    fn promotion_and_annotations() {
        let p = pos("8/4P3/8/8/8/8/k7/4K3 w - - 0 1");
        let mv = parse_move(&p, "e8=N").unwrap();
        assert_eq!(mv.promotion, Some(PieceKind::Knight));
        assert_eq!(parse_move(&p, "e8").unwrap().promotion, Some(PieceKind::Queen));
        let start = Position::start();
        assert!(matches!(
            parse_move(&start, "Nf3+"),
            Err(ChessError::BadAnnotation { .. })
        ));
        assert!(parse_move(&start, "Nf3!?").is_ok());
    }

    #[test]
    fn garbage_is_unparseable() {
        let start = Position::start();
        assert!(matches!(
            parse_move(&start, "knight to f3"),
            Err(ChessError::Unparseable(_))
        ));
    }
}
