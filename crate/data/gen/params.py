write('ieee33','IEEE 33-bus, Baran-Wu feeder with loads x8, impedances /8',L33,LD33,1,12.66,10.0,
  gens=[(1,0,24,-15,20,5.0,250,400),(18,0,5,-3,3,12.0,300,120),(25,0,5,-3,3,10.0,310,120),(33,0,5,-3,3,14.0,290,120)],
  stations=[(1,15,10,0.30,0.24),(2,21,10,0.30,0.30),(3,24,10,0.30,0.34),(4,30,10,0.30,0.30)])
write('ieee123','IEEE 123-bus, positive-sequence reduction with loads x8, impedances /8',L123,LD123,149,4.16,10.0,
  gens=[(149,0,24,-15,20,5.0,250,400),(66,0,5,-3,3,12.0,300,120),(83,0,5,-3,3,10.0,310,120),(114,0,5,-3,3,14.0,290,120)],
  stations=[(1,30,10,0.30,0.24),(2,57,10,0.30,0.30),(3,80,10,0.30,0.34),(4,104,10,0.30,0.30)])
