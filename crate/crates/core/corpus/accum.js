function Accum() {
    this.n = 0;
    this.add = function id1(x) { this.n += x };
    this.sub = function id2(x) { this.n -= x };
}

var a = new Accum();
a.add(5); 
a.sub(2);
print(a.n);
