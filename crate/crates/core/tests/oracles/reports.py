"""Reference readers for the report fixtures. Writes `<fixture>.golden.json`
next to every file under tests/fixtures/{junit,jacoco,lcov}.

Run from crates/core: python3 tests/oracles/reports.py
"""
import json
import re
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

U64 = re.compile(r'\+?[0-9]+')


class Bad(Exception):
    pass


def count(v):
    v = v.strip()
    if not U64.fullmatch(v) or int(v) >= 2 ** 64:
        raise Bad(f'not a count: {v!r}')
    return int(v)


def local(tag):
    return tag.rsplit('}', 1)[-1]


def xml_root(path):
    try:
        return ET.parse(path).getroot()
    except ET.ParseError as e:
        raise Bad(str(e))


# junit ---------------------------------------------------------------------

def junit(path):
    root = xml_root(path)
    if local(root.tag) not in ('testsuite', 'testsuites'):
        raise Bad('root')
    cases = []

    def walk(el, suites):
        tag = local(el.tag)
        if tag in ('testsuite', 'testsuites'):
            declared = el.get('tests')
            n_cases = sum(1 for d in el.iter() if local(d.tag) == 'testcase')
            if declared is not None and count(declared) != n_cases:
                raise Bad('count')
            for ch in el:
                walk(ch, suites + [el])
        elif tag == 'testcase':
            cases.append(case(el, suites))
        else:
            for ch in el:
                walk(ch, suites)

    walk(root, [])
    first = next((e.get('name') for e in root.iter()
                  if local(e.tag) == 'testsuite' and e.get('name') is not None), None)
    suite_id = root.get('name') if root.get('name') is not None else (first or 'junit')
    return {'suite_id': suite_id, 'cases': [c for c in cases if c is not None]}


def case(el, suites):
    name = el.get('name')
    if name is None:
        raise Bad('no name')
    if any(local(d.tag) == 'testcase' for d in list(el.iter())[1:]):
        raise Bad('nested')
    cls = el.get('classname')
    if cls is None:
        cls = next((s.get('name') for s in reversed(suites) if s.get('name') is not None), None)
        if cls is None:
            raise Bad('no classname')
    status, ftype = 'passed', None
    for d in list(el.iter())[1:]:
        t = local(d.tag)
        if t in ('failure', 'error') and status == 'passed':
            status = 'failed' if t == 'failure' else 'errored'
            ftype = d.get('type', t)
    if any(local(d.tag) == 'skipped' for d in el.iter()):
        return None
    out = {'class_name': cls, 'method_name': name, 'status': status}
    if ftype is not None:
        out['failure_type'] = ftype
    return out


# coverage ------------------------------------------------------------------

KEYS = ['lines', 'branches', 'methods']


def report_from(classes, totals=None):
    sums = {f'{k}_{s}': 0 for k in KEYS + ['classes'] for s in ('covered', 'total')}
    for c in classes:
        for k in KEYS:
            for s in ('covered', 'total'):
                sums[f'{k}_{s}'] += c[f'{k}_{s}']
        sums['classes_total'] += 1
        sums['classes_covered'] += int(c['lines_covered'] > 0 or c['methods_covered'] > 0)
    t = dict(sums)
    if totals:
        t.update(totals)
    for k in KEYS + ['classes']:
        if t[f'{k}_covered'] > t[f'{k}_total']:
            raise Bad('pairs')
    for c in classes:
        for k in KEYS:
            if c[f'{k}_covered'] > c[f'{k}_total']:
                raise Bad('class pairs')
    if classes and any(t[f'{k}_{s}'] != sums[f'{k}_{s}'] for k in KEYS for s in ('covered', 'total')):
        raise Bad('sums')
    order = ['lines_covered', 'lines_total', 'branches_covered', 'branches_total',
             'methods_covered', 'methods_total', 'classes_covered', 'classes_total']
    return {'totals': {k: t[k] for k in order}, 'per_class': classes}


JACOCO_TYPES = {'LINE': 'lines', 'BRANCH': 'branches', 'METHOD': 'methods', 'CLASS': 'classes'}


def counters(el):
    out = {}
    for c in el:
        if local(c.tag) != 'counter':
            continue
        kind, missed, covered = c.get('type'), c.get('missed'), c.get('covered')
        if kind is None or missed is None or covered is None:
            raise Bad('counter attrs')
        missed, covered = count(missed), count(covered)
        if kind in JACOCO_TYPES:
            k = JACOCO_TYPES[kind]
            out[f'{k}_covered'] = covered
            out[f'{k}_total'] = covered + missed
    return out


def jacoco(path):
    root = xml_root(path)
    if local(root.tag) != 'report':
        raise Bad('root')
    classes = []
    for el in root.iter():
        if local(el.tag) != 'class':
            continue
        if any(local(d.tag) == 'class' for d in list(el.iter())[1:]):
            raise Bad('nested class')
        if el.get('name') is None:
            raise Bad('class name')
        cs = counters(el)
        c = {'class_name': el.get('name').replace('/', '.')}
        for k in KEYS:
            c[f'{k}_covered'] = cs.get(f'{k}_covered', 0)
            c[f'{k}_total'] = cs.get(f'{k}_total', 0)
        classes.append(c)
    # counters whose parent is neither report nor class are never validated
    return report_from(classes, counters(root))


def lcov(path, strict):
    classes, sec = [], None

    def close(s):
        def hit(m):
            return sum(1 for v in m.values() if v > 0)
        c = {'class_name': s['file']}
        for k, found, hitk, m in (('lines', 'LF', 'LH', s['da']), ('branches', 'BRF', 'BRH', s['brda']),
                                  ('methods', 'FNF', 'FNH', s['fnda'])):
            c[f'{k}_covered'] = s[hitk] if hitk in s else hit(m)
            c[f'{k}_total'] = s[found] if found in s else len(m)
            if c[f'{k}_covered'] > c[f'{k}_total']:
                raise Bad('hits exceed')
        return c

    text = Path(path).read_bytes().decode('utf-8')
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line == 'end_of_record':
            if sec is None:
                raise Bad('eor')
            classes.append(close(sec))
            sec = None
            continue
        if ':' not in line:
            if strict:
                raise Bad('not a record')
            continue
        key, value = line.split(':', 1)
        if key in ('TN', 'VER'):
            continue
        if key == 'SF':
            if sec is not None:
                if strict:
                    raise Bad('sf')
                classes.append(close(sec))
            sec = {'file': value, 'da': {}, 'brda': {}, 'fnda': {}}
            continue
        if key in ('FN', 'FNL', 'FNA', 'FNDA', 'FNF', 'FNH', 'BRDA', 'BRF', 'BRH', 'DA', 'LF', 'LH'):
            if sec is None:
                raise Bad('outside')
            f = value.split(',')
            if key in ('LF', 'LH', 'BRF', 'BRH', 'FNF', 'FNH'):
                sec[key] = count(value)
            elif key == 'DA':
                if len(f) < 2:
                    raise Bad('da')
                ln, h = count(f[0]), count(f[1])
                sec['da'][ln] = sec['da'].get(ln, 0) + h
            elif key == 'BRDA':
                if len(f) != 4:
                    raise Bad('brda')
                taken = 0 if f[3].strip() == '-' else count(f[3])
                k = tuple(f[:3])
                sec['brda'][k] = sec['brda'].get(k, 0) + taken
            elif key == 'FNDA':
                if len(f) < 2:
                    raise Bad('fnda')
                h = count(f[0])
                k = ','.join(f[1:])
                sec['fnda'][k] = sec['fnda'].get(k, 0) + h
            continue
        if strict:
            raise Bad('unknown')
    if sec is not None:
        if strict:
            raise Bad('eof')
        classes.append(close(sec))
    return report_from(classes)


def outcome(f, *args):
    try:
        return {'ok': f(*args)}
    except Bad as e:
        return {'error': str(e)}


def main():
    base = Path(sys.argv[1] if len(sys.argv) > 1 else 'tests/fixtures')
    for p in sorted(base.glob('junit/*.xml')):
        write(p, outcome(junit, p))
    for p in sorted(base.glob('jacoco/*.xml')):
        write(p, outcome(jacoco, p))
    for p in sorted(base.glob('lcov/*.info')):
        write(p, {'strict': outcome(lcov, p, True), 'lenient': outcome(lcov, p, False)})


def write(p, value):
    out = p.with_name(p.name + '.golden.json')
    out.write_text(json.dumps(value, indent=2, ensure_ascii=False) + '\n', encoding='utf-8')
    print(out)


if __name__ == '__main__':
    main()
