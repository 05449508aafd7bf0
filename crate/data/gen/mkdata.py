import os, math, collections, sys
from f33 import lines as L33, loads as LD33
from f123 import lines as L123, loads as LD123
SCALE=8.0
def write(name, title, lines, loads, root, kv, base, gens, stations, vroot=(1.0,1.1025), vrange=(0.9025,1.1025)):
    d=os.path.join(HERE,'..',name); os.makedirs(d,exist_ok=True)
    zb=kv*kv/base
    buses=sorted({root}|{l[0] for l in lines}|{l[1] for l in lines})
    with open(f'{d}/bundle.meta','w') as f:
        short,note=title.split(', ',1)
        f.write(f'# {note}\nname = "{short}"\nbase_mva = {base}\n')
    with open(f'{d}/buses.csv','w') as f:
        f.write('id,kind,p_load_mw,q_load_mvar,v2_min,v2_max\n')
        for b in buses:
            p,q=loads.get(b,(0,0))
            lo,hi=(vroot if b==root else vrange)
            f.write(f'{b},{"root" if b==root else "load"},{p*SCALE/1000:.4f},{q*SCALE/1000:.4f},{lo},{hi}\n')
    ch=collections.defaultdict(list)
    for l in lines: ch[l[0]].append(l[1])
    def ds(b):
        p,q=loads.get(b,(0,0)); P=p;Q=q
        for c in ch[b]:
            a,bq=ds(c); P+=a;Q+=bq
        return P,Q
    gcap=collections.defaultdict(float)
    for g in gens: gcap[g[0]]+=g[2]
    sbus=collections.Counter(st[1] for st in stations)
    def ev(b): return 5.5 if (sbus[b] or any(ev(c) for c in ch[b])) else 0.0
    def dg(b): return gcap[b]+sum(dg(c) for c in ch[b])
    with open(f'{d}/lines.csv','w') as f:
        f.write('from,to,r_pu,x_pu,s_max_mva\n')
        for (a,b,r,x) in lines:
            P,Q=ds(b); S=max(math.hypot(P*SCALE/1000+ev(b),Q*SCALE/1000),dg(b))
            smax=math.ceil((1.3*S+1.5)*2)/2
            f.write(f'{a},{b},{r/zb/SCALE:.8f},{x/zb/SCALE:.8f},{smax}\n')
    with open(f'{d}/generators.csv','w') as f:
        f.write('bus,p_min_mw,p_max_mw,q_min_mvar,q_max_mvar,c2,c1,c0\n')
        for g in gens: f.write(','.join(str(v) for v in g)+'\n')
    with open(f'{d}/stations.csv','w') as f:
        f.write('id,bus,chargers,lambda_nominal,lambda_offered\n')
        for s in stations: f.write(','.join(str(v) for v in s)+'\n')
HERE=os.path.dirname(os.path.abspath(__file__))
exec(open(sys.argv[1] if len(sys.argv)>1 else os.path.join(HERE,'params.py')).read())
