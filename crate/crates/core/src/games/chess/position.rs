//! Board representation, FEN and legal move generation.

use std::fmt;

use super::ChessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub fn flip(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::White => "white",
            Color::Black => "black",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PieceKind {
    Pawn,
    Knight,
    Bishop,
    Rook,
    Queen,
    King,
}

impl PieceKind {
    pub fn letter(self) -> char {
        match self {
            PieceKind::Pawn => 'P',
            PieceKind::Knight => 'N',
            PieceKind::Bishop => 'B',
            PieceKind::Rook => 'R',
            PieceKind::Queen => 'Q',
            PieceKind::King => 'K',
        }
    }

    pub fn from_letter(c: char) -> Option<PieceKind> {
        Some(match c.to_ascii_uppercase() {
            'P' => PieceKind::Pawn,
            'N' => PieceKind::Knight,
            'B' => PieceKind::Bishop,
            'R' => PieceKind::Rook,
            'Q' => PieceKind::Queen,
            'K' => PieceKind::King,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Piece {
    pub color: Color,
    pub kind: PieceKind,
}

impl Piece {
    fn fen_char(self) -> char {
        let c = self.kind.letter();
        match self.color {
            Color::White => c,
            Color::Black => c.to_ascii_lowercase(),
        }
    }
}

/// Square index: `rank * 8 + file`, a1 = 0, h8 = 63.
pub type Square = u8;

pub fn file_of(sq: Square) -> i8 {
    (sq % 8) as i8
}

pub fn rank_of(sq: Square) -> i8 {
    (sq / 8) as i8
}

fn offset(sq: Square, df: i8, dr: i8) -> Option<Square> {
    let f = file_of(sq) + df;
    let r = rank_of(sq) + dr;
    ((0..8).contains(&f) && (0..8).contains(&r)).then(|| (r * 8 + f) as Square)
}

pub fn square_name(sq: Square) -> String {
    format!(
        "{}{}",
        (b'a' + file_of(sq) as u8) as char,
        (b'1' + rank_of(sq) as u8) as char
    )
}

pub fn parse_square(s: &str) -> Option<Square> {
    let b = s.as_bytes();
    if b.len() != 2 || !(b'a'..=b'h').contains(&b[0]) || !(b'1'..=b'8').contains(&b[1]) {
        return None;
    }
    Some((b[1] - b'1') * 8 + (b[0] - b'a'))
}

const KNIGHT_STEPS: [(i8, i8); 8] = [
    (1, 2),
    (2, 1),
    (2, -1),
    (1, -2),
    (-1, -2),
    (-2, -1),
    (-2, 1),
    (-1, 2),
];
const KING_STEPS: [(i8, i8); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];
const ROOK_DIRS: [(i8, i8); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const BISHOP_DIRS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

pub const WHITE_KINGSIDE: u8 = 1;
pub const WHITE_QUEENSIDE: u8 = 2;
pub const BLACK_KINGSIDE: u8 = 4;
pub const BLACK_QUEENSIDE: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Move {
    pub from: Square,
    pub to: Square,
    pub promotion: Option<PieceKind>,
}

impl Move {
    pub fn uci(&self) -> String {
        let mut s = format!("{}{}", square_name(self.from), square_name(self.to));
        if let Some(p) = self.promotion {
            s.push(p.letter().to_ascii_lowercase());
        }
        s
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Position {
    board: [Option<Piece>; 64],
    pub side: Color,
    pub castling: u8,
    pub ep: Option<Square>,
    pub halfmove: u32,
    pub fullmove: u32,
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Position({})", self.to_fen())
    }
}

pub const START_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

impl Position {
    pub fn start() -> Position {
        Position::from_fen(START_FEN).expect("start position is valid")
    }

    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        self.board[sq as usize]
    }

    pub fn from_fen(fen: &str) -> Result<Position, ChessError> {
        let bad = |why: &str| ChessError::InvalidFen(format!("{fen}: {why}"));
        let parts: Vec<&str> = fen.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let mut board = [None; 64];
        let ranks: Vec<&str> = parts[0].split('/').collect();
        if ranks.len() != 8 {
            return Err(bad("expected 8 ranks"));
        }
        for (i, row) in ranks.iter().enumerate() {
            let rank = 7 - i as u8;
            let mut file = 0u8;
            for c in row.chars() {
                if let Some(d) = c.to_digit(10) {
                    if !(1..=8).contains(&d) {
                        return Err(bad("bad empty-square count"));
                    }
                    file += d as u8;
                } else {
                    let kind = PieceKind::from_letter(c).ok_or_else(|| bad("bad piece letter"))?;
                    let color = if c.is_ascii_uppercase() {
                        Color::White
                    } else {
                        Color::Black
                    };
                    if file >= 8 {
                        return Err(bad("rank too long"));
                    }
                    board[(rank * 8 + file) as usize] = Some(Piece { color, kind });
                    file += 1;
                }
            }
            if file != 8 {
                return Err(bad("rank does not cover 8 files"));
            }
        }
        let side = match parts[1] {
            "w" => Color::White,
            "b" => Color::Black,
            _ => return Err(bad("side to move must be w or b")),
        };
        let mut castling = 0;
        if parts[2] != "-" {
            for c in parts[2].chars() {
                castling |= match c {
                    'K' => WHITE_KINGSIDE,
                    'Q' => WHITE_QUEENSIDE,
                    'k' => BLACK_KINGSIDE,
                    'q' => BLACK_QUEENSIDE,
                    _ => return Err(bad("bad castling field")),
                };
            }
        }
        let ep = match parts[3] {
            "-" => None,
            s => Some(parse_square(s).ok_or_else(|| bad("bad en passant square"))?),
        };
        let halfmove = parts[4].parse().map_err(|_| bad("bad halfmove clock"))?;
        let fullmove: u32 = parts[5].parse().map_err(|_| bad("bad fullmove number"))?;
        if fullmove == 0 {
            return Err(bad("fullmove number starts at 1"));
        }
        let pos = Position {
            board,
            side,
            castling,
            ep,
            halfmove,
            fullmove,
        };
        pos.check_sane().map_err(|why| bad(&why))?;
        Ok(pos)
    }

    fn check_sane(&self) -> Result<(), String> {
        for color in [Color::White, Color::Black] {
            let kings = (0..64)
                .filter(|&sq| {
                    self.board[sq]
                        == Some(Piece {
                            color,
                            kind: PieceKind::King,
                        })
                })
                .count();
            if kings != 1 {
                return Err(format!("{} must have exactly one king", color.name()));
            }
        }
        for sq in (0..8).chain(56..64) {
            if matches!(self.board[sq], Some(p) if p.kind == PieceKind::Pawn) {
                return Err("pawn on first or last rank".into());
            }
        }
        if self.in_check(self.side.flip()) {
            return Err("side not to move is in check".into());
        }
        Ok(())
    }

    pub fn to_fen(&self) -> String {
        let mut s = self.placement_fen();
        s.push(' ');
        s.push(if self.side == Color::White { 'w' } else { 'b' });
        s.push(' ');
        s.push_str(&self.castling_fen());
        s.push(' ');
        match self.ep {
            Some(sq) => s.push_str(&square_name(sq)),
            None => s.push('-'),
        }
        s.push_str(&format!(" {} {}", self.halfmove, self.fullmove));
        s
    }

    fn placement_fen(&self) -> String {
        let mut s = String::new();
        for rank in (0..8).rev() {
            let mut empty = 0;
            for file in 0..8 {
                match self.board[rank * 8 + file] {
                    Some(p) => {
                        if empty > 0 {
                            s.push_str(&empty.to_string());
                            empty = 0;
                        }
                        s.push(p.fen_char());
                    }
                    None => empty += 1,
                }
            }
            if empty > 0 {
                s.push_str(&empty.to_string());
            }
            if rank > 0 {
                s.push('/');
            }
        }
        s
    }

    fn castling_fen(&self) -> String {
        let mut s = String::new();
        for (bit, c) in [
            (WHITE_KINGSIDE, 'K'),
            (WHITE_QUEENSIDE, 'Q'),
            (BLACK_KINGSIDE, 'k'),
            (BLACK_QUEENSIDE, 'q'),
        ] {
            if self.castling & bit != 0 {
                s.push(c);
            }
        }
        if s.is_empty() {
            s.push('-');
        }
        s
    }

    /// Key for repetition detection: placement, side, castling, and the en
    /// passant square only when a capture there is actually legal.
    pub fn repetition_key(&self) -> String {
        let ep = match self.ep {
            Some(sq) if self.legal_moves().iter().any(|m| m.to == sq && self.is_en_passant(m)) => {
                square_name(sq)
            }
            _ => "-".to_string(),
        };
        format!(
            "{} {} {} {}",
            self.placement_fen(),
            if self.side == Color::White { 'w' } else { 'b' },
            self.castling_fen(),
            ep
        )
    }

    pub fn king_square(&self, color: Color) -> Square {
        (0..64u8)
            .find(|&sq| {
                self.board[sq as usize]
                    == Some(Piece {
                        color,
                        kind: PieceKind::King,
                    })
            })
            .expect("validated positions have both kings")
    }

    pub fn in_check(&self, color: Color) -> bool {
        self.is_attacked(self.king_square(color), color.flip())
    }

    /// Is `sq` attacked by any piece of `by`?
    pub fn is_attacked(&self, sq: Square, by: Color) -> bool {
        let has = |s: Option<Square>, kinds: &[PieceKind]| {
            s.and_then(|s| self.board[s as usize])
                .is_some_and(|p| p.color == by && kinds.contains(&p.kind))
        };
        // a pawn of `by` attacks diagonally forward, so look backwards from sq
        let pawn_dr = if by == Color::White { -1 } else { 1 };
        if has(offset(sq, -1, pawn_dr), &[PieceKind::Pawn])
            || has(offset(sq, 1, pawn_dr), &[PieceKind::Pawn])
        {
            return true;
        }
        if KNIGHT_STEPS
            .iter()
            .any(|&(df, dr)| has(offset(sq, df, dr), &[PieceKind::Knight]))
        {
            return true;
        }
        if KING_STEPS
            .iter()
            .any(|&(df, dr)| has(offset(sq, df, dr), &[PieceKind::King]))
        {
            return true;
        }
        for (dirs, kinds) in [
            (ROOK_DIRS, [PieceKind::Rook, PieceKind::Queen]),
            (BISHOP_DIRS, [PieceKind::Bishop, PieceKind::Queen]),
        ] {
            for (df, dr) in dirs {
                let mut cur = offset(sq, df, dr);
                while let Some(s) = cur {
                    if let Some(p) = self.board[s as usize] {
                        if p.color == by && kinds.contains(&p.kind) {
                            return true;
                        }
                        break;
                    }
                    cur = offset(s, df, dr);
                }
            }
        }
        false
    }

    pub fn is_capture(&self, mv: &Move) -> bool {
        self.board[mv.to as usize].is_some() || self.is_en_passant(mv)
    }

    pub fn is_en_passant(&self, mv: &Move) -> bool {
        matches!(self.board[mv.from as usize], Some(p) if p.kind == PieceKind::Pawn)
            && Some(mv.to) == self.ep
            && file_of(mv.from) != file_of(mv.to)
            && self.board[mv.to as usize].is_none()
    }

    pub fn is_castle(&self, mv: &Move) -> bool {
        matches!(self.board[mv.from as usize], Some(p) if p.kind == PieceKind::King)
            && (file_of(mv.from) - file_of(mv.to)).abs() == 2
    }

    /// Moves obeying piece movement rules, ignoring own-king safety.
    pub fn pseudo_legal_moves(&self) -> Vec<Move> {
        let mut out = Vec::with_capacity(48);
        let us = self.side;
        for from in 0..64u8 {
            let Some(piece) = self.board[from as usize] else {
                continue;
            };
            if piece.color != us {
                continue;
            }
            match piece.kind {
                PieceKind::Pawn => self.pawn_moves(from, &mut out),
                PieceKind::Knight => self.step_moves(from, &KNIGHT_STEPS, &mut out),
                PieceKind::King => {
                    self.step_moves(from, &KING_STEPS, &mut out);
                    self.castle_moves(from, &mut out);
                }
                PieceKind::Bishop => self.slide_moves(from, &BISHOP_DIRS, &mut out),
                PieceKind::Rook => self.slide_moves(from, &ROOK_DIRS, &mut out),
                PieceKind::Queen => {
                    self.slide_moves(from, &BISHOP_DIRS, &mut out);
                    self.slide_moves(from, &ROOK_DIRS, &mut out);
                }
            }
        }
        out
    }

    fn push_pawn(&self, from: Square, to: Square, out: &mut Vec<Move>) {
        if rank_of(to) == 0 || rank_of(to) == 7 {
            for promo in [
                PieceKind::Queen,
                PieceKind::Rook,
                PieceKind::Bishop,
                PieceKind::Knight,
            ] {
                out.push(Move {
                    from,
                    to,
                    promotion: Some(promo),
                });
            }
        } else {
            out.push(Move {
                from,
                to,
                promotion: None,
            });
        }
    }

    fn pawn_moves(&self, from: Square, out: &mut Vec<Move>) {
        let (dr, start_rank) = match self.side {
            Color::White => (1, 1),
            Color::Black => (-1, 6),
        };
        if let Some(one) = offset(from, 0, dr) {
            if self.board[one as usize].is_none() {
                self.push_pawn(from, one, out);
                if rank_of(from) == start_rank {
                    let two = offset(from, 0, 2 * dr).expect("double push stays on board");
                    if self.board[two as usize].is_none() {
                        out.push(Move {
                            from,
                            to: two,
                            promotion: None,
                        });
                    }
                }
            }
        }
        for df in [-1, 1] {
            if let Some(to) = offset(from, df, dr) {
                match self.board[to as usize] {
                    Some(p) if p.color != self.side => self.push_pawn(from, to, out),
                    None if Some(to) == self.ep => out.push(Move {
                        from,
                        to,
                        promotion: None,
                    }),
                    _ => {}
                }
            }
        }
    }

    fn step_moves(&self, from: Square, steps: &[(i8, i8)], out: &mut Vec<Move>) {
        for &(df, dr) in steps {
            if let Some(to) = offset(from, df, dr) {
                if self.board[to as usize].is_none_or(|p| p.color != self.side) {
                    out.push(Move {
                        from,
                        to,
                        promotion: None,
                    });
                }
            }
        }
    }

    fn slide_moves(&self, from: Square, dirs: &[(i8, i8)], out: &mut Vec<Move>) {
        for &(df, dr) in dirs {
            let mut cur = offset(from, df, dr);
            while let Some(to) = cur {
                match self.board[to as usize] {
                    None => out.push(Move {
                        from,
                        to,
                        promotion: None,
                    }),
                    Some(p) => {
                        if p.color != self.side {
                            out.push(Move {
                                from,
                                to,
                                promotion: None,
                            });
                        }
                        break;
                    }
                }
                cur = offset(to, df, dr);
            }
        }
    }

    fn castle_moves(&self, from: Square, out: &mut Vec<Move>) {
        let (home, king_bit, queen_bit) = match self.side {
            Color::White => (4u8, WHITE_KINGSIDE, WHITE_QUEENSIDE),
            Color::Black => (60u8, BLACK_KINGSIDE, BLACK_QUEENSIDE),
        };
        if from != home || self.in_check(self.side) {
            return;
        }
        let them = self.side.flip();
        let rook = Some(Piece {
            color: self.side,
            kind: PieceKind::Rook,
        });
        if self.castling & king_bit != 0
            && self.board[(home + 3) as usize] == rook
            && self.board[(home + 1) as usize].is_none()
            && self.board[(home + 2) as usize].is_none()
            && !self.is_attacked(home + 1, them)
        {
            out.push(Move {
                from,
                to: home + 2,
                promotion: None,
            });
        }
        if self.castling & queen_bit != 0
            && self.board[(home - 4) as usize] == rook
            && self.board[(home - 1) as usize].is_none()
            && self.board[(home - 2) as usize].is_none()
            && self.board[(home - 3) as usize].is_none()
            && !self.is_attacked(home - 1, them)
        {
            out.push(Move {
                from,
                to: home - 2,
                promotion: None,
            });
        }
    }

    /// Apply a (pseudo-)legal move without checking legality.
    pub fn make_move(&self, mv: &Move) -> Position {
        let mut next = self.clone();
        let piece = self.board[mv.from as usize].expect("move from an occupied square");
        let capture = self.is_capture(mv);

        if self.is_en_passant(mv) {
            let victim = offset(mv.to, 0, if self.side == Color::White { -1 } else { 1 })
                .expect("en passant victim square");
            next.board[victim as usize] = None;
        }
        if self.is_castle(mv) {
            let (rook_from, rook_to) = if file_of(mv.to) == 6 {
                (mv.from + 3, mv.from + 1)
            } else {
                (mv.from - 4, mv.from - 1)
            };
            next.board[rook_to as usize] = next.board[rook_from as usize].take();
        }
        next.board[mv.from as usize] = None;
        next.board[mv.to as usize] = Some(match mv.promotion {
            Some(kind) => Piece {
                color: piece.color,
                kind,
            },
            None => piece,
        });

        next.ep = None;
        if piece.kind == PieceKind::Pawn && (rank_of(mv.to) - rank_of(mv.from)).abs() == 2 {
            next.ep = Some((mv.from + mv.to) / 2);
        }
        for sq in [mv.from, mv.to] {
            next.castling &= match sq {
                0 => !WHITE_QUEENSIDE,
                7 => !WHITE_KINGSIDE,
                56 => !BLACK_QUEENSIDE,
                63 => !BLACK_KINGSIDE,
                4 => !(WHITE_KINGSIDE | WHITE_QUEENSIDE),
                60 => !(BLACK_KINGSIDE | BLACK_QUEENSIDE),
                _ => 0xff,
            };
        }
        next.halfmove = if piece.kind == PieceKind::Pawn || capture {
            0
        } else {
            self.halfmove + 1
        };
        if self.side == Color::Black {
            next.fullmove += 1;
        }
        next.side = self.side.flip();
        next
    }

    pub fn is_legal(&self, mv: &Move) -> bool {
        !self.make_move(mv).in_check(self.side)
    }

    pub fn legal_moves(&self) -> Vec<Move> {
        self.pseudo_legal_moves()
            .into_iter()
            .filter(|m| self.is_legal(m))
            .collect()
    }

    pub fn is_checkmate(&self) -> bool {
        self.in_check(self.side) && self.legal_moves().is_empty()
    }

    pub fn insufficient_material(&self) -> bool {
        let mut minors = Vec::new();
        for sq in 0..64u8 {
            if let Some(p) = self.board[sq as usize] {
                match p.kind {
                    PieceKind::King => {}
                    PieceKind::Knight | PieceKind::Bishop => minors.push((p, sq)),
                    _ => return false,
                }
            }
        }
        match minors.as_slice() {
            [] | [_] => true,
            // bishops only, all on squares of one colour
            many => {
                many.iter().all(|(p, _)| p.kind == PieceKind::Bishop) && {
                    let shade = |sq: Square| (file_of(sq) + rank_of(sq)) % 2;
                    let first = shade(many[0].1);
                    many.iter().all(|(_, sq)| shade(*sq) == first)
                }
            }
        }
    }

    /// The same position with the other side to move, for diagnostics.
    pub(crate) fn with_side(&self, side: Color) -> Position {
        let mut p = self.clone();
        p.side = side;
        p.ep = None;
        p
    }
}

/// Leaf count of the legal move tree to `depth`.
pub fn perft(pos: &Position, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = pos.legal_moves();
    if depth == 1 {
        return moves.len() as u64;
    }
    moves
        .iter()
        .map(|m| perft(&pos.make_move(m), depth - 1))
        .sum()
}
