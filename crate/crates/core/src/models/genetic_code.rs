/// Nucleotide order used to enumerate codons.
pub const NUCLEOTIDES_TCAG: [char; 4] = ['T', 'C', 'A', 'G'];

const STANDARD: &str = "FFLLSSSSYY**CC*WLLLLPPPPHHQQRRRRIIIMTTTTNNKKSSRRVVVVAAAADDEEGGGG";

/// Codon to amino-acid table over the 64 codons in TCAG order; `*` marks stops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneticCode {
    table: Vec<char>,
}

impl GeneticCode {
    /// The standard nuclear code.
    pub fn standard() -> Self {
        Self { table: STANDARD.chars().collect() }
    }

    /// A code from 64 amino-acid letters in TCAG codon order.
    pub fn from_table(table: &str) -> Option<Self> {
        let table: Vec<char> = table.chars().collect();
        (table.len() == 64).then_some(Self { table })
    }

    pub fn amino_acid(&self, codon: &str) -> Option<char> {
        let mut index = 0;
        let mut len = 0;
        for c in codon.chars() {
            index = index * 4 + NUCLEOTIDES_TCAG.iter().position(|&n| n == c)?;
            len += 1;
        }
        (len == 3).then(|| self.table[index])
    }

    /// Non-stop codons in TCAG order.
    pub fn sense_codons(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(61);
        for (k, &aa) in self.table.iter().enumerate() {
            if aa != '*' {
                out.push([k / 16, (k / 4) % 4, k % 4].iter().map(|&i| NUCLEOTIDES_TCAG[i]).collect::<String>());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_code_has_61_sense_codons() {
        let code = GeneticCode::standard();
        let sense = code.sense_codons();
        assert_eq!(sense.len(), 61);
        for stop in ["TGA", "TAG", "TAA"] {
            assert!(!sense.iter().any(|c| c == stop));
            assert_eq!(code.amino_acid(stop), Some('*'));
        }
        assert_eq!(code.amino_acid("AAA"), Some('K'));
        assert_eq!(code.amino_acid("AAG"), Some('K'));
        assert_eq!(code.amino_acid("AAC"), Some('N'));
        assert_eq!(code.amino_acid("ATG"), Some('M'));
        assert_eq!(code.amino_acid("TGG"), Some('W'));
        assert_eq!(code.amino_acid("GGG"), Some('G'));
    }
}
