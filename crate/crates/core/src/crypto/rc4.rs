//! RC4 key scheduling and keystream generation.

use super::CryptoError;

/// Keystream bytes discarded by [`Rc4State::with_drop`] in the hardened mode.
pub const RC4_DROP_HARDENED: usize = 3072;

/// S-box permutation and the two PRGA cursors.
#[derive(Clone)]
pub struct Rc4State {
    s: [u8; 256],
    i: u8,
    j: u8,
}

impl std::fmt::Debug for Rc4State {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Rc4State").field("i", &self.i).field("j", &self.j).finish_non_exhaustive()
    }
}

/// Key-scheduling algorithm. Keys must be 1 to 256 bytes.
pub fn rc4_ksa(key: &[u8]) -> Result<Rc4State, CryptoError> {
    if key.is_empty() || key.len() > 256 {
        return Err(CryptoError::BadKeyLength(key.len()));
    }
    let mut s = [0u8; 256];
    for (i, v) in s.iter_mut().enumerate() {
        *v = i as u8;
    }
    let mut j = 0u8;
    for i in 0..256 {
        j = j.wrapping_add(s[i]).wrapping_add(key[i % key.len()]);
        s.swap(i, j as usize);
    }
    Ok(Rc4State { s, i: 0, j: 0 })
}

/// XORs `data` with the next keystream bytes, advancing the state.
pub fn rc4_apply(state: &mut Rc4State, data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    state.apply_in_place(&mut out);
    out
}

impl Rc4State {
    pub fn new(key: &[u8]) -> Result<Self, CryptoError> {
        rc4_ksa(key)
    }

    /// KSA followed by discarding the first `drop` keystream bytes.
    pub fn with_drop(key: &[u8], drop: usize) -> Result<Self, CryptoError> {
        let mut st = rc4_ksa(key)?;
        for _ in 0..drop {
            st.next_byte();
        }
        Ok(st)
    }

    #[inline]
    pub fn next_byte(&mut self) -> u8 {
        self.i = self.i.wrapping_add(1);
        self.j = self.j.wrapping_add(self.s[self.i as usize]);
        self.s.swap(self.i as usize, self.j as usize);
        let idx = self.s[self.i as usize].wrapping_add(self.s[self.j as usize]);
        self.s[idx as usize]
    }

    pub fn apply_in_place(&mut self, data: &mut [u8]) {
        for b in data {
            *b ^= self.next_byte();
        }
    }

    pub fn keystream(&mut self, len: usize) -> Vec<u8> {
        (0..len).map(|_| self.next_byte()).collect()
    }

    pub fn sbox(&self) -> &[u8; 256] {
        &self.s
    }

    pub fn cursors(&self) -> (u8, u8) {
        (self.i, self.j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn is_permutation(s: &[u8; 256]) -> bool {
        let mut seen = [false; 256];
        for &v in s {
            seen[v as usize] = true;
        }
        seen.iter().all(|x| *x)
    }

    #[test]
    fn key_length_bounds() {
        assert!(matches!(rc4_ksa(&[]), Err(CryptoError::BadKeyLength(0))));
        assert!(matches!(rc4_ksa(&[0u8; 257]), Err(CryptoError::BadKeyLength(257))));
        assert!(rc4_ksa(&[0u8; 256]).is_ok());
        assert!(rc4_ksa(&[7]).is_ok());
    }

    #[test]
    fn ksa_leaves_cursors_at_zero() {
        let st = rc4_ksa(b"Key").unwrap();
        assert_eq!(st.cursors(), (0, 0));
        assert!(is_permutation(st.sbox()));
    }

    #[test]
    fn empty_input() {
        let mut st = rc4_ksa(b"Key").unwrap();
        assert!(rc4_apply(&mut st, &[]).is_empty());
        assert_eq!(st.cursors(), (0, 0));
    }

    #[test]
    fn drop_discards_prefix() {
        let mut plain = rc4_ksa(b"Key").unwrap();
        plain.keystream(RC4_DROP_HARDENED);
        let mut dropped = Rc4State::with_drop(b"Key", RC4_DROP_HARDENED).unwrap();
        assert_eq!(plain.keystream(32), dropped.keystream(32));
    }

    proptest! {
        #[test]
        fn sbox_stays_permutation(key in proptest::collection::vec(any::<u8>(), 1..=256), steps in 0usize..2000) {
            let mut st = rc4_ksa(&key).unwrap();
            prop_assert!(is_permutation(st.sbox()));
            st.keystream(steps);
            prop_assert!(is_permutation(st.sbox()));
        }

        #[test]
        fn apply_is_involution(key in proptest::collection::vec(any::<u8>(), 1..=64),
                               data in proptest::collection::vec(any::<u8>(), 0..4096)) {
            let ct = rc4_apply(&mut rc4_ksa(&key).unwrap(), &data);
            let pt = rc4_apply(&mut rc4_ksa(&key).unwrap(), &ct);
            prop_assert_eq!(pt, data);
        }
    }
}
