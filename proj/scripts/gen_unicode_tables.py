#!/usr/bin/env python3
"""Regenerates src/unicode_tables.inc from Python's unicodedata.

Emits canonical decomposition, combining classes, primary composition
pairs, simple lowercase mappings and coarse character-class ranges.
Hangul syllables are excluded everywhere; the C++ side handles them
algorithmically.
"""
import sys
import unicodedata as u

HANGUL_BASE, HANGUL_END = 0xAC00, 0xD7A4


def codepoints():
    for cp in range(0x110000):
        if HANGUL_BASE <= cp < HANGUL_END:
            continue
        if u.category(chr(cp)) == 'Cs':
            continue
        yield cp


def main(out_path):
    nfd_index = []   # (cp, offset, len)
    nfd_flat = []
    ccc = []         # (cp, class)
    comp = []        # (a, b, composed)
    lower = []       # (cp, lower_cp)
    for cp in codepoints():
        ch = chr(cp)
        d = u.normalize('NFD', ch)
        if d != ch:
            nfd_index.append((cp, len(nfd_flat), len(d)))
            nfd_flat.extend(ord(c) for c in d)
        cc = u.combining(ch)
        if cc:
            ccc.append((cp, cc))
        dec = u.decomposition(ch)
        if dec and not dec.startswith('<'):
            parts = dec.split()
            if len(parts) == 2:
                a, b = int(parts[0], 16), int(parts[1], 16)
                if u.normalize('NFC', chr(a) + chr(b)) == ch:
                    comp.append((a, b, cp))
        lo = ch.lower()
        if lo != ch and len(lo) == 1:
            lower.append((cp, ord(lo)))
    # U+0130 lowers to a 2-codepoint sequence; fold it to plain 'i' so the
    # 1:1 table stays total over cased letters.
    lower.append((0x0130, ord('i')))
    lower.sort()
    comp.sort()

    # Coarse classes: letter / mark / digit / space, everything else OTHER.
    def klass(cp):
        ch = chr(cp)
        cat = u.category(ch)
        if cat.startswith('L'):
            return 1
        if cat.startswith('M'):
            return 2
        if cat == 'Nd':
            return 3
        if cat.startswith('Z') or ch in '\t\n\r\x0b\x0c':
            return 4
        return 0

    ranges = []
    cur_start, cur_k = 0, klass(0)
    for cp in range(1, 0x110000):
        k = klass(cp)
        if k != cur_k:
            if cur_k:
                ranges.append((cur_start, cp - 1, cur_k))
            cur_start, cur_k = cp, k
    if cur_k:
        ranges.append((cur_start, 0x10FFFF, cur_k))

    with open(out_path, 'w') as f:
        w = f.write
        w('// Generated by scripts/gen_unicode_tables.py (unicodedata %s).\n'
          % u.unidata_version)
        w('// Do not edit by hand.\n\n')

        w('static const DecompEntry kDecomp[] = {\n')
        for cp, off, n in nfd_index:
            w('{0x%X,%d,%d},' % (cp, off, n))
        w('\n};\n')
        w('static const uint32_t kDecompFlat[] = {\n')
        w(','.join('0x%X' % c for c in nfd_flat))
        w('\n};\n')

        w('static const CccEntry kCcc[] = {\n')
        w(','.join('{0x%X,%d}' % e for e in ccc))
        w('\n};\n')

        w('static const CompEntry kComp[] = {\n')
        w(','.join('{0x%X,0x%X,0x%X}' % e for e in comp))
        w('\n};\n')

        w('static const LowerEntry kLower[] = {\n')
        w(','.join('{0x%X,0x%X}' % e for e in lower))
        w('\n};\n')

        w('static const RangeEntry kClassRanges[] = {\n')
        w(','.join('{0x%X,0x%X,%d}' % r for r in ranges))
        w('\n};\n')
    print('wrote %s: %d decomp, %d ccc, %d comp, %d lower, %d ranges'
          % (out_path, len(nfd_index), len(ccc), len(comp), len(lower),
             len(ranges)))


if __name__ == '__main__':
    main(sys.argv[1] if len(sys.argv) > 1 else 'src/unicode_tables.inc')
